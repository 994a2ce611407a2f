from experiments.management.base import ExperimentCommand
from transport.usecases.reconstruction import (
    SourceToTraceMap,
    gradient_check,
    reconstruct_f_least_squares,
    select_lambda_discrepancy,
    synthesize_observation,
)

NOISELESS_TOL = 0.1


class Command(ExperimentCommand):
    help = "Reconstrução de f por mínimos quadrados a partir de ∂_t u sintético no bordo."

    def run(self, setup, out_dir):
        spec = setup.config.study("reconstruct")
        problem = setup.source_problem()
        n = setup.config.grid.n
        A = SourceToTraceMap(problem, n)
        f_true = problem.source_cells({"index": 0}, A.mesh)
        observed, noise_norm = synthesize_observation(A, f_true, noise=spec.noise, seed=setup.config.seed)

        if spec.discrepancy and noise_norm > 0:
            result = select_lambda_discrepancy(
                problem, observed, noise_norm, n=n, f_true=f_true, max_iters=spec.max_iters
            )
        else:
            result = reconstruct_f_least_squares(
                problem, observed, n=n, lam=spec.lam, f_true=f_true, max_iters=spec.max_iters, operator=A
            )
        check = gradient_check(A, observed, lam=result.lam, seed=setup.config.seed)

        centroids = A.mesh.centroids
        self.write_table(
            out_dir / "f_hat.csv",
            ["x", "y", "f_hat", "f_true"],
            [[c[0], c[1], fh, ft] for c, fh, ft in zip(centroids, result.f_hat, f_true)],
        )
        self.write_table(
            out_dir / "residual_history.csv",
            ["iteration", "residual"],
            [[k + 1, r] for k, r in enumerate(result.history)],
        )
        self.write_table(
            out_dir / "gradient_check.csv",
            ["direction", "relative_error"],
            [[k, e] for k, e in enumerate(check.errors)],
        )

        self.emit(
            f"λ = {result.lam:.3e}, iterações = {result.iterations}, convergiu = {result.converged} ({result.message})"
        )
        self.emit(f"Resíduo = {result.residual_norm:.4e}, ruído = {noise_norm:.4e}")
        self.emit(f"Erro relativo L² = {result.relative_error:.4e}")

        verdict = "PASS" if check.passed() else "FAIL"
        self.verdict_line("Gradiente adjunto", verdict, f"max erro relativo = {check.max_relative_error:.3e}")
        verdicts = [verdict]
        if spec.noise == 0.0:
            ok = result.relative_error is not None and result.relative_error <= NOISELESS_TOL
            verdicts.append("PASS" if ok else "FAIL")
            self.verdict_line("Reconstrução sem ruído", verdicts[-1], f"tolerância {NOISELESS_TOL:g}")
        return verdicts
