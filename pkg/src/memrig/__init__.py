"""Software twin of a 1T1R ReRAM crossbar characterisation rig."""

from .campaigns import (
    Dataset,
    EnduranceReport,
    Record,
    export_csv,
    import_csv,
    run_c2c_campaign,
    run_endurance_campaign,
    run_read_disturb_campaign,
)
from .chip import build_fixture, load_chip_profile
from .client import CellAddress, ClientConfig, LoopbackTransport, MemrigClient
from .firmware import Firmware, setup
from .programming import IspvaParams, ProgramResult, Status, ispva

__version__ = "0.1.0"

__all__ = [
    "CellAddress",
    "ClientConfig",
    "Dataset",
    "EnduranceReport",
    "Firmware",
    "IspvaParams",
    "LoopbackTransport",
    "MemrigClient",
    "ProgramResult",
    "Record",
    "Status",
    "build_fixture",
    "export_csv",
    "import_csv",
    "ispva",
    "load_chip_profile",
    "run_c2c_campaign",
    "run_endurance_campaign",
    "run_read_disturb_campaign",
    "setup",
]
