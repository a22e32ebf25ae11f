import math
import time
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from loguru import logger

from src.free_actions.core.closure import (
    assert_no_algebraicity,
    certify_empty_closure,
    orbit_partition,
)
from src.free_actions.core.errors import AclIndeterminate, NotFreeError
from src.free_actions.core.freepair import (
    Direction,
    FreePair,
    Side,
    ball_size,
    certified_pair,
    check_fixed_points,
    init_builder,
    run_schedule,
    schreier_ball,
    tree_ball_problems,
)
from src.free_actions.core.spectra import (
    AGREEMENT_TOL,
    displacement_bound,
    displacement_floor,
    kazhdan_check_on_orbit,
    kesten_report,
)
from src.free_actions.core.structures import (
    OracleKind,
    RandomGraphOracle,
    StructureOracle,
    extension_check,
    make_oracle,
)
from src.free_actions.core.tower import (
    fixed_classes_over_domain,
    home_sort_control,
    tower_neumann_failure_demo,
)
from src.free_actions.data_manager.data_manager import DataManager, StoreConfig
from src.free_actions.service.schemas import CheckResult, Report, RunConfig

# Arity above which orbit counting uses a smaller pool of window elements
ORBIT_FULL_ARITY = 3
ORBIT_SMALL_POOL = 12
TOWER_DEMO_DEPTH = 2


def expected_orbit_count(kind: OracleKind, n: int) -> Optional[int]:
    """Number of injective n-type classes over the empty set, where it is known."""
    if kind is OracleKind.PURE_SET:
        return 1
    if kind is OracleKind.DENSE_LINEAR_ORDER:
        return math.factorial(n)
    if kind is OracleKind.RANDOM_GRAPH:
        return 2 ** (n * (n - 1) // 2)
    return None


class FreeActionService:
    def __init__(
        self,
        config: Optional[RunConfig] = None,
        data_manager: Optional[DataManager] = None,
        progress: bool = False,
    ):
        self.config = config or RunConfig()
        self.data_manager = data_manager or DataManager(StoreConfig())
        self.progress = progress
        logger.info(f"FreeActionService for {self.config.oracle.value} (seed {self.config.seed})")

    # -- helpers -----------------------------------------------------------------

    def make_oracle(self, kind: Optional[OracleKind] = None, **overrides) -> StructureOracle:
        kind = kind or self.config.oracle
        params = self.config.model_copy(update={"oracle": kind}).oracle_params()
        params.update(overrides)
        return make_oracle(kind, seed=self.config.seed, **params)

    def _report(self, command: str) -> Report:
        return Report(command=command, config=self.config.model_dump(mode="json"))

    @staticmethod
    def _finish(report: Report, started: float) -> Report:
        report.timing["seconds"] = round(time.perf_counter() - started, 3)
        logger.info(
            f"{report.command}: {sum(c.passed for c in report.checks)}/{len(report.checks)} checks passed"
        )
        return report

    def _pair_path(self) -> Path:
        return self.config.pair or self.data_manager.config.default_pair_path(self.config)

    # -- commands ------------------------------------------------------------------

    def orbits(self) -> Report:
        """Injective orbit counts for n = 1..orbit_arity plus the acl triviality check."""
        started = time.perf_counter()
        cfg = self.config
        report = self._report("orbits")
        oracle = self.make_oracle()
        s = oracle.window(cfg.level)
        report.data["window_size"] = s.size
        if cfg.window_file is not None:
            report.data["window_file"] = str(self.data_manager.export_window(s, cfg.window_file))

        counts: Dict[str, int] = {}
        for n in range(1, cfg.orbit_arity + 1):
            limit = cfg.orbit_limit if n <= ORBIT_FULL_ARITY else min(cfg.orbit_limit, ORBIT_SMALL_POOL)
            partition = orbit_partition(oracle, (), n, cfg.level, injective=True, limit=limit)
            counts[str(n)] = partition.class_count
            expected = expected_orbit_count(oracle.kind, n)
            if expected is not None and n <= ORBIT_FULL_ARITY:
                report.add(
                    f"orbit_count_n{n}",
                    partition.class_count == expected,
                    value=partition.class_count,
                    expected=expected,
                    detail=f"injective {n}-tuples from the first {min(limit, s.size)} elements",
                )
        report.data["orbit_counts"] = counts

        if isinstance(oracle, RandomGraphOracle):
            k = oracle.declared_extension_level(cfg.level)
            unmet = extension_check(oracle, k, cfg.level)
            report.add(
                f"extension_property_k{k}",
                not unmet,
                value=len(unmet),
                expected=0,
                detail=f"unmet {k}-extension demands in the level-{cfg.level} window",
            )

        if oracle.kind is OracleKind.EQUIV_TOWER:
            # Pair-type counts of the unbounded tower grow with the level
            growing = make_oracle(
                OracleKind.EQUIV_TOWER, seed=cfg.seed, max_window=cfg.max_window, max_level=cfg.max_level
            )
            by_level = [orbit_partition(growing, (), 2, level, injective=True).class_count for level in (1, 2, 3)]
            report.data["tower_pair_types_by_level"] = by_level
            report.add(
                "tower_not_oligomorphic",
                all(b > a for a, b in zip(by_level, by_level[1:])),
                value=by_level[-1],
                detail=f"pair-type counts at levels 1..3: {by_level}",
            )

        no_alg = assert_no_algebraicity(
            oracle, cfg.acl_samples, cfg.level, seed=cfg.seed, level_max=cfg.acl_rounds
        )
        report.add(
            "no_algebraicity",
            no_alg.passed,
            value=no_alg.samples,
            detail=f"{len(no_alg.failures)} failures over {no_alg.growth_rounds} growth rounds",
        )
        report.data["no_algebraicity_failures"] = no_alg.failures
        return self._finish(report, started)

    def build(self) -> Tuple[Report, FreePair]:
        """Build a free pair, certify it and persist it."""
        started = time.perf_counter()
        cfg = self.config
        report = self._report("build")
        oracle = self.make_oracle()
        builder = init_builder(
            oracle,
            level=cfg.level,
            cert_depth=cfg.cert_depth,
            acl_rounds=cfg.acl_rounds,
            certify_max=cfg.certify_max,
            search_levels=cfg.search_levels,
        )
        run_schedule(builder, cfg.rounds, progress=self.progress)
        radius = cfg.schreier_radius if cfg.rounds > 0 else 0
        if radius:
            schreier_ball(builder, 0, radius)
        pair = certified_pair(builder, workers=cfg.workers)

        report.checks.extend(self.certify_pair(pair, radius))
        path = self.data_manager.save_pair(pair, self._pair_path(), radius=radius)
        report.data.update(self._pair_summary(pair, radius))
        report.data["pair_file"] = str(path)
        return self._finish(report, started), pair

    def verify(self, pair_path: Optional[Path] = None) -> Report:
        """Reload a persisted pair and re-certify it from the file alone."""
        started = time.perf_counter()
        report = self._report("verify")
        path = Path(pair_path) if pair_path is not None else self._pair_path()
        pair, header = self.data_manager.load_pair(path)
        radius = int(header.extra.get("radius", 0))
        report.checks.extend(self.certify_pair(pair, radius))
        report.data.update(self._pair_summary(pair, radius))
        report.data["pair_file"] = str(path)
        return self._finish(report, started)

    def spectra(self, pair_path: Optional[Path] = None) -> Report:
        started = time.perf_counter()
        cfg = self.config
        report = self._report("spectra")

        kesten = kesten_report(cfg.rmax, tol=cfg.tol, workers=cfg.workers)
        first = kesten.rows[0].value
        report.add("lambda_1", abs(first - 2.0) <= AGREEMENT_TOL, value=first, expected=2.0, tolerance=AGREEMENT_TOL)
        report.add("lambda_increasing", kesten.increasing, value=kesten.rows[-1].value)
        report.add("lambda_below_norm", kesten.below_norm, value=max(kesten.values()), expected=kesten.norm)
        report.add("gap_shrinking", kesten.gap_shrinking, value=kesten.rows[-1].gap)
        report.add(
            "radial_agreement",
            kesten.radial_agreement <= AGREEMENT_TOL,
            value=kesten.radial_agreement,
            tolerance=AGREEMENT_TOL,
        )
        if kesten.dense_agreement is not None:
            report.add(
                "dense_agreement",
                kesten.dense_agreement <= AGREEMENT_TOL,
                value=kesten.dense_agreement,
                tolerance=AGREEMENT_TOL,
            )
        floor = displacement_floor()
        # Worst inner-ball displacement at radius r is 4 - lambda(r - 1)
        worst = min(4.0 - v for v in kesten.values()[:-1])
        report.add(
            "displacement_worst_all_radii",
            worst >= floor - AGREEMENT_TOL,
            value=worst,
            expected=floor,
            tolerance=AGREEMENT_TOL,
        )
        report.data["kesten_table"] = [asdict(row) for row in kesten.rows]
        report.data["kesten_norm"] = kesten.norm

        r = min(cfg.displacement_radius, cfg.rmax)
        disp = displacement_bound(r, samples=cfg.samples, seed=cfg.seed, tol=cfg.tol, workers=cfg.workers)
        report.add(
            "displacement_worst_case",
            disp.worst_sum >= disp.floor - disp.tol,
            value=disp.worst_sum,
            expected=disp.floor,
            tolerance=disp.tol,
        )
        report.add("displacement_root", abs(disp.root_sum - 4.0) <= disp.tol, value=disp.root_sum, expected=4.0, tolerance=disp.tol)
        report.add(
            "kazhdan_max_form",
            disp.min_max_form >= disp.epsilon - disp.tol,
            value=disp.min_max_form,
            expected=disp.epsilon,
            tolerance=disp.tol,
        )
        report.add("displacement_identity", disp.identity_error <= disp.tol, value=disp.identity_error, tolerance=disp.tol)
        report.data["displacement"] = asdict(disp)

        pair_path = pair_path or cfg.pair
        if pair_path is not None:
            pair, header = self.data_manager.load_pair(Path(pair_path))
            radius = min(int(header.extra.get("radius", 0)), cfg.rmax)
            if radius < 1:
                report.add("schreier_cayley_agreement", False, detail="pair was persisted without a Schreier radius")
            else:
                try:
                    kaz = kazhdan_check_on_orbit(pair, 0, radius, tol=cfg.tol, workers=cfg.workers)
                except NotFreeError as e:
                    report.add("schreier_cayley_agreement", False, detail=str(e))
                else:
                    report.add(
                        "schreier_cayley_agreement",
                        kaz.passed,
                        value=kaz.agreement,
                        tolerance=kaz.tol,
                        detail=f"radius {radius}, {kaz.dimension} vertices",
                    )
                    report.data["kazhdan"] = asdict(kaz)
        return self._finish(report, started)

    def counterexample(self) -> Report:
        """Imaginary classes of the tower are always fixed; the home sorts still separate."""
        started = time.perf_counter()
        cfg = self.config
        report = self._report("counterexample")
        depth = cfg.tower_depth or TOWER_DEMO_DEPTH
        tower = self.make_oracle(OracleKind.EQUIV_TOWER, depth=depth)
        builder = init_builder(
            tower,
            level=cfg.level,
            cert_depth=cfg.cert_depth,
            acl_rounds=cfg.acl_rounds,
            certify_max=cfg.certify_max,
            search_levels=cfg.search_levels,
        )
        run_schedule(builder, cfg.rounds, progress=self.progress)
        pair = certified_pair(builder, workers=cfg.workers)
        report.add("tower_pair_free", pair.report.passed, value=pair.report.evaluations)

        bound = tower.support_depth() + 1
        fixed = fixed_classes_over_domain(tower, pair.phi) + fixed_classes_over_domain(tower, pair.gamma)
        report.add(
            "fixed_class_everywhere",
            all(c.index <= bound for c in fixed),
            value=len(fixed),
            expected=len(pair.phi) + len(pair.gamma),
            detail=f"every fixed class has index <= {bound}",
        )
        report.data["fixed_class_indices"] = sorted({c.index for c in fixed})

        demo = tower_neumann_failure_demo(tower, 0, cfg.budget)
        report.add(
            "imaginary_separation_fails",
            demo.exhaustive and not demo.separated,
            value=demo.candidates,
            detail=f"max fixed index {demo.max_fixed_index} at support depth {demo.depth}",
        )
        report.data["demo"] = asdict(demo)

        home = home_sort_control(tower, 0)
        report.add("tower_home_sort_separates", bool(home["separated"]), detail=str(home.get("image", home.get("reason"))))
        control = self.make_oracle(OracleKind.RANDOM_GRAPH)
        control.window(cfg.level)
        certify_empty_closure(control)
        graph_home = home_sort_control(control, 0)
        report.add(
            "random_graph_control_separates",
            bool(graph_home["separated"]),
            detail=str(graph_home.get("image", graph_home.get("reason"))),
        )
        report.data["controls"] = [home, graph_home]
        return self._finish(report, started)

    # -- certification -----------------------------------------------------------------

    def certify_pair(self, pair: FreePair, radius: int) -> List[CheckResult]:
        """Every claim about a pair that can be re-checked from the pair itself."""
        oracle = pair.oracle
        report = Report(command="certify")

        try:
            certify_empty_closure(oracle)
            report.add("empty_closure_trivial", True)
        except AclIndeterminate as e:
            report.add("empty_closure_trivial", False, detail=str(e))

        for side in (Side.PHI, Side.GAMMA):
            f = pair.map_for(side)
            bad = f.type_violations(oracle, limit=1)
            report.add(
                f"{side.value}_type_preserving",
                not bad,
                value=len(f),
                detail=f"breaks the type of {bad[0]}" if bad else None,
            )

        broken = [s.index for s in pair.steps if not s.ledger_holds()]
        report.add(
            "ledger_fresh",
            not broken,
            value=len(pair.steps),
            detail=f"steps {broken[:5]} reuse tracked points" if broken else None,
        )
        stale = self._ledger_mismatches(pair)
        report.add("ledger_matches_maps", not stale, detail="; ".join(stale) or None)

        fixed = check_fixed_points(pair, pair.cert_depth, workers=self.config.workers)
        report.add(
            "fixed_points",
            fixed.passed,
            value=len(fixed.violations),
            expected=0,
            detail=f"{fixed.evaluations} word evaluations up to length {pair.cert_depth} on {fixed.elements} elements",
        )
        moved = all(pair.phi(x) != x for x in pair.phi)
        report.add("fixed_point_free_generator", moved and len(pair.phi) > 0, value="a")

        for r in range(1, radius + 1):
            ball = schreier_ball(pair, 0, r, extend=False)
            problems = tree_ball_problems(ball, r)
            report.add(
                f"schreier_ball_r{r}",
                not problems,
                value=ball.number_of_nodes(),
                expected=ball_size(r),
                detail="; ".join(problems) or None,
            )
        return report.checks

    @staticmethod
    def _ledger_mismatches(pair: FreePair) -> List[str]:
        out = []
        for side in (Side.PHI, Side.GAMMA):
            last = next((s for s in reversed(pair.steps) if s.side is side), None)
            if last is None:
                continue
            f = pair.map_for(side)
            domain, image = (f.domain, f.image) if last.direction is Direction.DOMAIN else (f.image, f.domain)
            if set(last.C) != domain or set(last.D) != image:
                out.append(f"{side.value} differs from its last step record ({last.index})")
        return out

    @staticmethod
    def _pair_summary(pair: FreePair, radius: int) -> Dict:
        return {
            "oracle": pair.oracle.kind.value,
            "window_size": pair.oracle.size,
            "level": pair.oracle.level,
            "phi_size": len(pair.phi),
            "gamma_size": len(pair.gamma),
            "steps": len(pair.steps),
            "cert_depth": pair.cert_depth,
            "schreier_radius": radius,
        }
