from carleman.domain.errors import NoAssignmentExists
from carleman.domain.field import PolarAngleField, winding_diagnosis
from carleman.domain.stream_graph import check_radii, find_loop, has_closed_loop, reverse_graph_consistent
from carleman.reports import format_winding, graph_to_dot
from experiments.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = "Grafo de corrente Λ, verificação de laços (condição C) e atribuição de raios."

    def run(self, setup, out_dir):
        if setup.proposal is not None:
            for sectors, cones_ok, loop_free in setup.proposal.history:
                self.emit(f"  {sectors:>3} setores: cones={cones_ok} sem_laço={loop_free}")
        if isinstance(setup.field, PolarAngleField):
            self.emit(format_winding(winding_diagnosis(setup.field)))

        graph = setup.graph
        rows = [
            [iid, iface.i, iface.j, sign.kind.value, sign.min, sign.max]
            for iid, sign in sorted(graph.signs.items())
            for iface in [setup.partition.interface(iid)]
        ]
        self.write_table(out_dir / "interfaces.csv", ["interface", "i", "j", "sign", "flux_min", "flux_max"], rows)
        self.emit(f"Λ: {len(graph.nodes)} nós, {len(graph.edges)} arestas")
        consistent = reverse_graph_consistent(setup.partition, setup.field, setup.density, graph.tol_sign)
        self.emit(f"Inversão H → −H inverte todas as arestas: {consistent}")

        if has_closed_loop(graph):
            self.write_text(out_dir / "graph.dot", graph_to_dot(graph, name=setup.config.name))
            cycle = find_loop(graph)
            path = " -> ".join(f"O{n}" for n in [*cycle, cycle[0]])
            self.stdout.write(self.style.ERROR(f"Laço fechado: {path}"))
            raise NoAssignmentExists(f"Grafo com laço fechado: {path}", cycle=cycle)

        radii = setup.radii
        ok, violations = check_radii(radii, graph)
        self.write_text(out_dir / "graph.dot", graph_to_dot(graph, radii, name=setup.config.name))
        self.write_table(
            out_dir / "radii.csv",
            ["subdomain", "radius"],
            [[sid, r] for sid, r in radii.radii.items()],
        )
        self.emit(f"r_base = {radii.base:.6g}, r* = {radii.r_star:.6g}, profundidade = {radii.depth}")
        self.verdict_line("Raios certificados", "PASS" if ok else "FAIL", "" if ok else str(violations[:3]))
        return ["PASS" if ok else "FAIL"]
