import pytest

from src.ftn.component.protocol import FtnParams, Protocol, new_router_state
from src.ftn.component.topology import build_reference_topology
from src.ftn.component.wire import Message, MessageKind
from src.ftn.services.simulation_service import SimulationService


@pytest.fixture(scope="session")
def topology():
    return build_reference_topology()


@pytest.fixture(scope="session")
def service():
    return SimulationService()


@pytest.fixture
def addr(topology):
    return lambda name: topology.nodes[name].address


@pytest.fixture
def router(topology):
    def make(name, protocol=Protocol.FTN, **params):
        node = topology.nodes[name]
        return new_router_state(name, node.address, topology.table(name).copy(), FtnParams(**params), protocol)

    return make


@pytest.fixture
def data(addr):
    def make(sender="GS1", destination="SW5-2", id="m1", attempt=0, bits=500):
        return Message(
            kind=MessageKind.DATA, sender=addr(sender), destination=addr(destination), id=id, attempt=attempt,
            bits=bits,
        )

    return make
