from experiments.management.base import ExperimentCommand
from experiments.utils.csv_output import study_rows, study_summary_rows
from transport.usecases.observability import (
    minimal_time_report,
    observability_study,
    profile_boundary_norms,
)


class Command(ExperimentCommand):
    help = "Estudo de observabilidade ‖u(·,0)‖ ≤ C‖u‖_{∂Ω×(0,T)} com refinamento de malha."

    def run(self, setup, out_dir):
        spec = setup.config.study("observability")
        n_ensemble = spec.ensemble if spec.ensemble is not None else setup.numerics.ensemble_size
        problem = setup.observability_problem()
        study, report = observability_study(
            problem,
            setup.weight,
            n=setup.config.grid.n,
            n_ensemble=n_ensemble,
            runner=setup.runner(),
            levels=spec.levels,
            drift_tol=setup.numerics.mesh_drift_tol,
            failure_growth=setup.numerics.failure_growth,
            density=setup.density,
        )
        if setup.config.weight.kind == "condition_a":
            report = minimal_time_report(
                setup.weight,
                setup.config.T,
                cone=setup.condition_a_cone,
                domain=setup.domain,
                field=setup.field,
                density=setup.density,
            )

        header, rows = study_rows(study)
        self.write_table(out_dir / "observability.csv", header, rows)
        header, rows = study_summary_rows(study)
        self.write_table(out_dir / "observability_levels.csv", header, rows)
        self.write_table(
            out_dir / "horizon.csv",
            ["T", "T0", "mu", "closed_form"],
            [[report.T, report.T0, report.mu, report.closed_form]],
        )

        self.emit(f"T = {report.T:.6g}, T₀ = {report.T0:.6g}, μ = {report.mu:.6g}")
        if problem.initial_profile:
            norms = ", ".join(f"{v:.4e}" for v in profile_boundary_norms(study))
            self.emit(f"Perfil {problem.initial_profile}: ‖u‖ no bordo por nível = [{norms}]")
            self.emit(f"Deriva de u(·,T) relativa a u₀: {study.notes.get('final_drift', 0.0):.4e}")
        if study.failure_detected:
            self.emit(f"Crescimento ≥ {study.failure_growth:g}× por refinamento: {study.growth}")
        constants = ", ".join(f"{c:.6g}" for c in study.constants)
        self.verdict_line("Observabilidade", study.verdict, f"C por nível = [{constants}], deriva = {study.drift:.3g}")
        return [study.verdict]
