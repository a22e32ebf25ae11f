import pytest

from src.free_actions.core.errors import ResourceLimitExceeded
from src.free_actions.core.freepair import Side
from src.free_actions.core.structures import OracleKind
from src.free_actions.data_manager.data_manager import DataManager, StoreConfig
from src.free_actions.service.run_service import FreeActionService, expected_orbit_count
from src.free_actions.service.schemas import RunConfig


@pytest.fixture
def data_manager(tmp_path):
    return DataManager(StoreConfig(pairs_dir=tmp_path / "pairs"))


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    path = tmp_path_factory.mktemp("pairs") / "graph.freepair"
    config = RunConfig(oracle="RandomGraph", level=2, rounds=3, cert_depth=8, schreier_radius=3, pair=path)
    service = FreeActionService(config)
    report, pair = service.build()
    return service, report, pair, path


def check(report, name):
    return next(c for c in report.checks if c.name == name)


def test_expected_orbit_counts():
    assert expected_orbit_count(OracleKind.PURE_SET, 3) == 1
    assert expected_orbit_count(OracleKind.DENSE_LINEAR_ORDER, 3) == 6
    assert expected_orbit_count(OracleKind.RANDOM_GRAPH, 3) == 8
    assert expected_orbit_count(OracleKind.EQUIV_TOWER, 2) is None


@pytest.mark.parametrize(
    "oracle, level, n3",
    [("PureSet", 4, 1), ("DenseLinearOrder", 5, 6), ("RandomGraph", 3, 8)],
)
def test_orbits(oracle, level, n3):
    config = RunConfig(oracle=oracle, level=level, orbit_arity=3, acl_samples=5)
    report = FreeActionService(config).orbits()
    assert report.passed, [c for c in report.checks if not c.passed]
    assert check(report, "orbit_count_n3").value == n3
    assert "seconds" in report.timing


def test_random_graph_orbits_check_extension_property():
    config = RunConfig(oracle="RandomGraph", level=2, orbit_arity=2, acl_samples=3)
    report = FreeActionService(config).orbits()
    extension = check(report, "extension_property_k2")
    assert extension.passed
    assert extension.value == 0


def test_tower_orbits_keep_growing():
    config = RunConfig(oracle="EquivTower", level=2, orbit_arity=2, acl_samples=3)
    report = FreeActionService(config).orbits()
    assert check(report, "tower_not_oligomorphic").passed
    assert report.data["tower_pair_types_by_level"] == sorted(report.data["tower_pair_types_by_level"])


def test_build_report(built):
    _, report, pair, path = built
    assert report.passed, [c for c in report.checks if not c.passed]
    assert check(report, "fixed_points").value == 0
    assert check(report, "schreier_ball_r3").value == 53
    assert report.data["steps"] == len(pair.steps)
    assert path.exists()


def test_verify_reproduces_build_certification(built):
    service, report, _, path = built
    verified = service.verify(path)
    assert verified.checks == report.checks
    assert verified.data["window_size"] == report.data["window_size"]


def test_tampered_mapping_breaks_type_preservation(built, tmp_path):
    service, _, pair, path = built
    oracle = pair.oracle
    phi = pair.phi
    x, y = phi.items()[-1]
    for z in range(oracle.size):
        if z in phi.image:
            continue
        candidate = dict(phi.items())
        candidate[x] = z
        tampered = type(phi)(candidate)
        if not tampered.is_type_preserving(oracle):
            break
    else:
        pytest.skip("no type-breaking replacement in this window")
    lines = path.read_text().splitlines()
    lines = [f"phi {x} {z}" if line == f"phi {x} {y}" else line for line in lines]
    bad = tmp_path / "tampered.freepair"
    bad.write_text("\n".join(lines) + "\n")

    report = service.verify(bad)
    assert not report.passed
    assert not check(report, f"{Side.PHI.value}_type_preserving").passed
    assert not check(report, "ledger_matches_maps").passed


def test_rounds_zero_persists_initial_pair(data_manager, tmp_path):
    config = RunConfig(oracle="PureSet", level=3, rounds=0, pair=tmp_path / "init.freepair")
    report, pair = FreeActionService(config, data_manager=data_manager).build()
    assert report.passed
    assert len(pair.phi) == len(pair.gamma) == 1
    assert pair.steps == []
    assert report.data["schreier_radius"] == 0


def test_spectra_with_pair(built):
    _, _, _, path = built
    config = RunConfig(rmax=4, samples=200, displacement_radius=3)
    report = FreeActionService(config).spectra(path)
    assert report.passed, [c for c in report.checks if not c.passed]
    assert check(report, "schreier_cayley_agreement").tolerance == 1e-9
    assert len(report.data["kesten_table"]) == 4


def test_counterexample():
    config = RunConfig(level=3, rounds=2, cert_depth=6)
    report = FreeActionService(config).counterexample()
    assert report.passed, [c for c in report.checks if not c.passed]
    assert check(report, "imaginary_separation_fails").passed
    assert max(report.data["fixed_class_indices"]) <= 3


def test_identical_runs_give_identical_reports(tmp_path):
    config = RunConfig(
        oracle="RandomGraph", level=2, rounds=2, cert_depth=6, schreier_radius=2, pair=tmp_path / "a.freepair"
    )
    first, _ = FreeActionService(config).build()
    second, _ = FreeActionService(config).build()
    one, two = first.model_dump(exclude={"timing"}), second.model_dump(exclude={"timing"})
    assert one == two
    assert one["checks"]


def test_level_cap_is_a_resource_limit():
    config = RunConfig(oracle="DenseLinearOrder", level=4, max_level=3)
    with pytest.raises(ResourceLimitExceeded):
        FreeActionService(config).orbits()


def test_orbits_exports_the_window(data_manager, tmp_path):
    path = tmp_path / "windows" / "dlo.txt"
    config = RunConfig(oracle="DenseLinearOrder", level=2, orbit_arity=2, acl_samples=3, window_file=path)
    report = FreeActionService(config, data_manager=data_manager).orbits()
    assert report.data["window_file"] == str(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "window DenseLinearOrder seed=0 level=2"
    assert sum(line.startswith("element ") for line in lines) == report.data["window_size"] == 3


@pytest.mark.slow
def test_default_radius_certifies_a_ball_of_radius_six(data_manager, tmp_path):
    config = RunConfig(oracle="PureSet", level=3, rounds=1, cert_depth=4, pair=tmp_path / "set.freepair")
    assert config.schreier_radius == 6
    report, _ = FreeActionService(config, data_manager=data_manager).build()
    ball = check(report, "schreier_ball_r6")
    assert ball.passed
    assert ball.value == ball.expected == 1457
    assert FreeActionService(config, data_manager=data_manager).verify(config.pair).checks == report.checks
