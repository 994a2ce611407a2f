from carleman.domain.errors import ConditionAViolation, ConditionBViolation
from carleman.domain.weight import build_condition_A_weight
from carleman.reports import cone_rows, field_report, format_field_report
from experiments.management.base import ExperimentCommand
from transport.usecases.observability import minimal_time_report


class Command(ExperimentCommand):
    help = "Relatório do campo H: δ₀, ‖H‖, condição A e cones por subdomínio."

    def run(self, setup, out_dir):
        report = field_report(
            setup.domain,
            setup.field,
            setup.partition,
            density=setup.density,
            tol_field=setup.numerics.tol_field,
        )
        text = format_field_report(report)

        cone = report.condition_a
        if cone is not None:
            beta = setup.config.weight.beta if setup.config.weight.kind == "condition_a" else None
            weight = build_condition_A_weight(
                setup.domain,
                setup.field,
                cone,
                beta or cone.delta1 / 2.0,
                margin=setup.config.weight.margin or setup.numerics.radius_margin,
                density=setup.density,
            )
            horizon = minimal_time_report(
                weight, setup.config.T, cone=cone, domain=setup.domain, field=setup.field, density=setup.density
            )
            text += (
                f"\nHorizonte: T₀ = {horizon.T0:.6g}, limiar fechado 2R(δ₁+‖H‖)/δ₁² = "
                f"{horizon.closed_form:.6g}, T = {horizon.T:.6g}\n"
            )

        self.emit(text)
        self.write_text(out_dir / "field_report.txt", text)
        self.write_table(out_dir / "cones.csv", ["subdomain", "v1", "v2", "delta1", "width"], cone_rows(report.cones))

        if cone is None and setup.config.weight.kind == "condition_a":
            raise ConditionAViolation("Condição A violada e o peso configurado é condition_a")
        if cone is None and not report.cones_found:
            missing = [sid for sid, c in report.cones if c is None]
            raise ConditionBViolation(
                f"Condição A violada e subdomínios sem cone: {missing}", subdomain=missing[0]
            )
        return []
