import numpy as np

from carleman.domain.weight import CarlemanWeight, interface_gaps, verify_interface_positivity
from carleman.reports import weight_table
from experiments.management.base import ExperimentCommand

S_POINTS = 10


class Command(ExperimentCommand):
    help = "Constrói o peso configurado, imprime (v_i, r_i, min B_i, β, δ₂, s₁) e certifica as interfaces."

    def run(self, setup, out_dir):
        weight = setup.weight
        horizon = setup.horizon()
        table = weight_table(weight, horizon)
        self.emit(table)
        self.write_text(out_dir / "weights.txt", table)
        if not weight.certified:
            self.stdout.write(self.style.WARNING("Peso forçado: B não é positivo em todo Q"))

        if not isinstance(weight, CarlemanWeight) or not weight.graph.edges:
            return []

        gaps = interface_gaps(weight, density=setup.density, tol=setup.numerics.tol_num)
        self.write_table(
            out_dir / "interface_gaps.csv",
            ["tail", "head", "min_gap", "half_delta2"],
            [[tail, head, gap, 0.5 * weight.delta2] for (tail, head), gap in sorted(gaps.items())],
        )

        s_lo = max(weight.s1, 1e-3)
        rows = []
        verdict = "PASS"
        for s in np.geomspace(s_lo, 10.0 * s_lo, S_POINTS):
            ok, margin = verify_interface_positivity(
                weight, float(s), T=setup.config.T, density=setup.density
            )
            rows.append([float(s), margin, ok])
            if not ok:
                verdict = "FAIL"
        self.write_table(out_dir / "interface_positivity.csv", ["s", "log_margin", "ok"], rows)
        worst = min(row[1] for row in rows)
        self.verdict_line("Positividade nas interfaces", verdict, f"pior margem log = {worst:.6g}")
        return [verdict]
