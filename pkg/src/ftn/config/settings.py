from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    APP_NAME: str = "FTN Hierarchical Network Simulator"
    VERSION: str = "0.1.0"

    # Paths - navigate from config/ -> ftn/ -> src/ -> project_root/
    BASE_DIR: Path = Path(__file__).parent.parent.parent.parent
    PARAMS_PATH: Path = BASE_DIR / "params.yaml"
    SCENARIO_DIR: Path = BASE_DIR / "scenarios"
    OUTPUT_DIR: Path = BASE_DIR / "output"
    LOG_DIR: Path = BASE_DIR / "logs"

    LOG_LEVEL: str = "INFO"
    CONSOLE_LOG_LEVEL: str = "INFO"

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()


DEFAULT_PARAMS: Dict[str, Dict[str, Any]] = {
    "protocol": {"qm_period_ms": 500, "buffer_timeout_ms": 1000, "retransmit_timeout_ms": 1200},
    "link": {"delay_ms": 50, "capacity_bps": 1_000_000, "switching_delay_ms": 0},
    "traffic": {"frame_bits": 500, "frame_rate": 100},
    "buffer": {"safety_factor": 10, "expected_loss": 20, "packet_bits": 500},
    "engine": {"horizon_ms": 60_000},
    "topology": {"hosts_per_switch": 3},
}

_params_cache: Dict[Path, Dict[str, Dict[str, Any]]] = {}


def load_params(params_path: Optional[Path] = None) -> Dict[str, Dict[str, Any]]:
    """
    Load numeric defaults from params.yaml, group by group, falling back to
    DEFAULT_PARAMS for anything the file leaves out.
    """
    path = Path(params_path or settings.PARAMS_PATH)
    if path in _params_cache:
        return _params_cache[path]

    loaded: Dict[str, Any] = {}
    if path.exists():
        with open(path, "r") as f:
            loaded = yaml.safe_load(f) or {}

    params = {group: {**values, **(loaded.get(group) or {})} for group, values in DEFAULT_PARAMS.items()}
    _params_cache[path] = params
    return params
