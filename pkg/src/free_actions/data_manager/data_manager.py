import configparser
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from loguru import logger

from src.free_actions.config import BASE_FOLDER, FREEPAIR_FORMAT
from src.free_actions.core.errors import ConfigError, FreeActionError, PairFormatError
from src.free_actions.core.freepair import Direction, FreePair, Side, StepRecord
from src.free_actions.core.partial import PartialAutomorphism
from src.free_actions.core.structures import (
    FiniteStructure,
    OracleKind,
    StructureOracle,
    WindowJournal,
    make_oracle,
)
from src.free_actions.service.schemas import PairHeader, Report, RunConfig

CONFIG_SECTIONS = {
    "oracle": {"oracle", "seed", "level", "max_level", "max_window", "extension_cap", "random_block", "tower_depth"},
    "build": {"rounds", "cert_depth", "schreier_radius", "workers", "acl_rounds", "acl_samples", "certify_max"},
    "spectra": {"rmax", "tol", "samples", "displacement_radius"},
    "search": {"search_levels", "budget", "orbit_arity", "orbit_limit"},
    "output": {"out", "pair", "window_file"},
}


@dataclass
class StoreConfig:
    pairs_dir: Path = BASE_FOLDER / "data" / "pairs"
    reports_dir: Path = BASE_FOLDER / "data" / "reports"
    windows_dir: Path = BASE_FOLDER / "data" / "windows"

    def default_pair_path(self, config: RunConfig) -> Path:
        return self.pairs_dir / f"{config.oracle.value}_seed{config.seed}.freepair"


class DataManager:
    """Config files, persisted pairs, window exports and reports."""

    def __init__(self, config: Optional[StoreConfig] = None):
        self.config = config or StoreConfig()
        self._write_lock = threading.Lock()

    # -- configuration ---------------------------------------------------------

    def load_config(self, path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """Flat RunConfig from an INI file (strict sections and keys) plus overrides."""
        values: Dict[str, Any] = {}
        if path is not None:
            values.update(self.read_config_file(Path(path)))
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return RunConfig.from_mapping(values)

    def read_config_file(self, path: Path) -> Dict[str, str]:
        parser = configparser.ConfigParser(strict=True, interpolation=None)
        try:
            with open(path, "r", encoding="utf-8") as f:
                parser.read_file(f)
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {path}") from e
        except configparser.Error as e:
            raise ConfigError(f"Malformed config file {path}: {e}") from e

        values: Dict[str, str] = {}
        for section in parser.sections():
            allowed = CONFIG_SECTIONS.get(section)
            if allowed is None:
                raise ConfigError(f"Unknown config section [{section}] in {path}")
            for key, value in parser.items(section):
                if key not in allowed:
                    raise ConfigError(f"Unknown key {key!r} in section [{section}] of {path}")
                values[key] = value
        logger.debug(f"Read {len(values)} settings from {path}")
        return values

    # -- pairs -------------------------------------------------------------------

    def save_pair(self, pair: FreePair, path: Path, radius: int = 0) -> Path:
        path = Path(path)
        text = "\n".join(self.dump_pair_lines(pair, radius)) + "\n"
        try:
            with self._write_lock:
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "w", encoding="utf-8") as f:
                    f.write(text)
        except OSError as e:
            logger.error(f"Failed to save pair to {path}: {e}")
            raise
        logger.info(f"Saved {pair.oracle.kind.value} pair ({len(pair.steps)} steps) to {path}")
        return path

    def dump_pair_lines(self, pair: FreePair, radius: int = 0) -> List[str]:
        oracle = pair.oracle
        journal = oracle.journal()
        lines = [
            FREEPAIR_FORMAT,
            f"oracle {oracle.kind.value}",
            f"seed {oracle.seed}",
            f"param max_window {oracle.max_window}",
            f"param max_level {oracle.max_level}",
        ]
        lines.extend(f"param {k} {v}" for k, v in sorted(oracle.params.items()) if v is not None)
        lines += [f"level {oracle.level}", f"cert_depth {pair.cert_depth}", f"radius {radius}"]
        start = 0
        for level, end in enumerate(journal.level_sizes):
            lines.append(f"window_level {level} {end}")
            lines.extend(f"element {x} {journal.payloads[x]}" for x in range(start, end))
            start = end
        lines.extend(f"phi {x} {y}" for x, y in pair.phi.items())
        lines.extend(f"gamma {x} {y}" for x, y in pair.gamma.items())
        for s in pair.steps:
            sets = " ".join(
                f"{name}=" + ",".join(map(str, getattr(s, name))) for name in ("C", "B", "A2", "B2", "D")
            )
            lines.append(f"step {s.index} {s.side.value} {s.direction.value} {s.level} {sets}")
        lines.append("end")
        return lines

    def load_pair(self, path: Path) -> Tuple[FreePair, PairHeader]:
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                lines = [line.rstrip("\n") for line in f]
        except FileNotFoundError as e:
            raise PairFormatError(f"Pair file not found: {path}") from e
        try:
            return self.parse_pair_lines(lines, source=str(path))
        except PairFormatError as e:
            logger.error(f"Rejected pair file {path}: {e}")
            raise

    def parse_pair_lines(self, lines: List[str], source: str = "<memory>") -> Tuple[FreePair, PairHeader]:
        lines = [line for line in lines if line.strip()]
        if not lines or lines[0] != FREEPAIR_FORMAT:
            raise PairFormatError(f"{source}: missing {FREEPAIR_FORMAT} header")
        if lines[-1] != "end":
            raise PairFormatError(f"{source}: truncated file (no end marker)")

        header: Dict[str, str] = {}
        params: Dict[str, Any] = {}
        journal = WindowJournal()
        phi: Dict[int, int] = {}
        gamma: Dict[int, int] = {}
        steps: List[StepRecord] = []
        for no, line in enumerate(lines[1:-1], start=2):
            parts = line.split()
            try:
                tag = parts[0]
                if tag in ("oracle", "seed", "level", "cert_depth", "radius"):
                    header[tag] = parts[1]
                elif tag == "param":
                    params[parts[1]] = int(parts[2])
                elif tag == "window_level":
                    if int(parts[1]) != len(journal.level_sizes):
                        raise ValueError("window levels out of order")
                    journal.level_sizes.append(int(parts[2]))
                elif tag == "element":
                    if int(parts[1]) != len(journal.payloads):
                        raise ValueError("element ids out of order")
                    journal.payloads.append(parts[2])
                elif tag in ("phi", "gamma"):
                    target = phi if tag == "phi" else gamma
                    x, y = int(parts[1]), int(parts[2])
                    if x in target:
                        raise ValueError(f"{tag} maps {x} twice")
                    target[x] = y
                elif tag == "step":
                    steps.append(self._parse_step(parts))
                else:
                    raise ValueError(f"unknown line tag {tag!r}")
            except (IndexError, ValueError) as e:
                raise PairFormatError(f"{source}:{no}: {e}") from e

        missing = {"oracle", "seed", "level", "cert_depth"} - set(header)
        if missing:
            raise PairFormatError(f"{source}: missing header fields {sorted(missing)}")
        try:
            pair_header = PairHeader(
                oracle=OracleKind.parse(header["oracle"]),
                seed=int(header["seed"]),
                params=params,
                level=int(header["level"]),
                cert_depth=int(header["cert_depth"]),
                extra={"radius": header.get("radius", "0")},
            )
            oracle = self.replay_oracle(pair_header, journal)
            pair = FreePair(
                oracle=oracle,
                phi=PartialAutomorphism(phi, oracle.level),
                gamma=PartialAutomorphism(gamma, oracle.level),
                cert_depth=pair_header.cert_depth,
                steps=steps,
            )
        except (ValueError, FreeActionError) as e:
            raise PairFormatError(f"{source}: {e}") from e
        for name, f in (("phi", pair.phi), ("gamma", pair.gamma)):
            outside = [x for x in f.domain | f.image if not 0 <= x < oracle.size]
            if outside:
                raise PairFormatError(f"{source}: {name} uses elements outside the window: {outside[:5]}")
        return pair, pair_header

    @staticmethod
    def _parse_step(parts: List[str]) -> StepRecord:
        sets = {}
        for item in parts[5:]:
            name, _, body = item.partition("=")
            sets[name] = tuple(int(t) for t in body.split(",") if t)
        if set(sets) != {"C", "B", "A2", "B2", "D"}:
            raise ValueError(f"step record lists sets {sorted(sets)}")
        return StepRecord(
            index=int(parts[1]),
            side=Side(parts[2]),
            direction=Direction(parts[3]),
            level=int(parts[4]),
            **sets,
        )

    @staticmethod
    def replay_oracle(header: PairHeader, journal: WindowJournal) -> StructureOracle:
        oracle = make_oracle(header.oracle, seed=header.seed, **header.params)
        oracle.replay(journal)
        if oracle.level != header.level:
            raise PairFormatError(f"Journal ends at level {oracle.level}, header says {header.level}")
        return oracle

    # -- windows and reports -------------------------------------------------------

    def export_window(self, structure: FiniteStructure, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(structure.export_lines()) + "\n")
        logger.info(f"Exported level-{structure.level} window ({structure.size} elements) to {path}")
        return path

    def write_report(self, report: Report, path: Optional[Path] = None) -> str:
        text = report.to_json()
        if path is not None:
            path = Path(path)
            with self._write_lock:
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "w", encoding="utf-8") as f:
                    f.write(text + "\n")
            logger.info(f"Report for {report.command} written to {path}")
        return text
