from pathlib import Path
from typing import Optional

from loguru import logger

from src.free_actions.data_manager.data_manager import DataManager
from src.free_actions.service.run_service import FreeActionService
from src.free_actions.service.schemas import Report, RunConfig


def _service(config: RunConfig, data_manager: Optional[DataManager], progress: bool) -> FreeActionService:
    return FreeActionService(config, data_manager=data_manager, progress=progress)


def _emit(report: Report, config: RunConfig, data_manager: Optional[DataManager]) -> Report:
    (data_manager or DataManager()).write_report(report, config.out)
    return report


def cmd_orbits(config: RunConfig, data_manager: Optional[DataManager] = None, progress: bool = False) -> Report:
    """Orbit counts of injective n-tuples, n = 1..orbit_arity."""
    report = _service(config, data_manager, progress).orbits()
    return _emit(report, config, data_manager)


def cmd_build(config: RunConfig, data_manager: Optional[DataManager] = None, progress: bool = False) -> Report:
    """Build, certify and persist a free pair."""
    report, _ = _service(config, data_manager, progress).build()
    return _emit(report, config, data_manager)


def cmd_verify(
    config: RunConfig,
    pair_file: Optional[Path] = None,
    data_manager: Optional[DataManager] = None,
    progress: bool = False,
) -> Report:
    """Re-certify a persisted pair from the file alone."""
    pair_file = pair_file or config.pair
    if pair_file is None:
        logger.warning("No pair file given; verifying the default pair path")
    report = _service(config, data_manager, progress).verify(pair_file)
    return _emit(report, config, data_manager)


def cmd_spectra(
    config: RunConfig,
    pair_file: Optional[Path] = None,
    data_manager: Optional[DataManager] = None,
    progress: bool = False,
) -> Report:
    """Kesten table and displacement bound, plus the orbit-ball comparison for a pair."""
    report = _service(config, data_manager, progress).spectra(pair_file or config.pair)
    return _emit(report, config, data_manager)


def cmd_counterexample(
    config: RunConfig, data_manager: Optional[DataManager] = None, progress: bool = False
) -> Report:
    """Structured failure to separate imaginary classes of the tower."""
    report = _service(config, data_manager, progress).counterexample()
    return _emit(report, config, data_manager)
