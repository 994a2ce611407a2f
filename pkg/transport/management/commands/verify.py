from carleman.domain.errors import InvalidArgument
from experiments.management.base import ExperimentCommand
from experiments.utils.csv_output import sweep_rows
from transport.usecases.carleman_verify import carleman_sweep, test_suite_random
from transport.usecases.observability import INITIAL_PROFILES


class Command(ExperimentCommand):
    help = "Varredura em s da estimativa de Carleman sobre um conjunto aleatório de funções de teste."

    def run(self, setup, out_dir):
        spec = setup.config.study("verify")
        weight = setup.weight
        sampling = setup.sampling()
        p = None if setup.p.is_zero else setup.p

        suite = test_suite_random(
            sampling,
            setup.field,
            spec.suite_size,
            setup.config.seed,
            p=p,
            diameter=setup.domain.diameter,
            cfl_max=setup.config.grid.cfl,
        )
        if spec.profile:
            if spec.profile not in INITIAL_PROFILES:
                raise InvalidArgument(f"Perfil desconhecido: {spec.profile!r}")
            suite.append(INITIAL_PROFILES[spec.profile](setup.domain))
        self.emit(f"{len(suite)} funções de teste, {sampling.mesh.n_cells} células, {len(sampling.times)} níveis")

        result = carleman_sweep(
            suite,
            weight,
            setup.field,
            p,
            sampling=sampling,
            p_bound=p.certified_bound(setup.domain, setup.density) if p is not None else 0.0,
            density=setup.density,
            s_points=spec.s_points,
            budget=setup.numerics.exponent_budget,
            c_cap=setup.numerics.c_cap,
            drift_weighted=spec.drift_weighted,
            allow_uncertified=spec.allow_uncertified,
        )

        header, rows = sweep_rows(result)
        self.write_table(out_dir / "sweep.csv", header, rows)
        self.write_table(
            out_dir / "sweep_summary.csv",
            ["s", "c_emp", "verdict"],
            [[s, c, None] for s, c in zip(result.s_grid, result.c_emp)]
            + [["C_emp_max", result.c_emp_max, result.verdict]],
        )
        self.emit(f"s ∈ [{result.s_grid[0]:.4g}, {result.s_grid[-1]:.4g}] (s_floor={result.s_floor:.4g}, s_cap={result.s_cap:.4g})")
        for note in result.notes:
            self.emit(f"  {note}")
        detail = f"C_emp_max = {result.c_emp_max:.6g}, cap = {result.c_cap:.3g}, tendência = {result.trend_ok}"
        if result.witness is not None:
            detail += f", testemunha = {result.witness}"
        self.verdict_line("Estimativa de Carleman", result.verdict, detail)
        return [result.verdict]
