"""
Run Output Writers

Writes the artifacts of one simulation run:
- trajectory.csv: t, agent, k, x1..xn, u1..um for every dense sample
- instants.csv: k, t, agent, x1..xn at each executed sampling instant
- metrics.json: stop information, disagreement series and formation errors
- report.md: human-readable summary rendered from templates/run_report.md.j2

Formation scenarios are written in the physical frame (r, r' and the total
control acceleration including the -A1 h_i feedforward).
"""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from jinja2 import BaseLoader, Environment

from hill import adjacent_separations, formation_error_components, physical_sample
from scenario_document import LoadedScenario
from settings import OutputNames
from sim import Metrics, TrajectoryRecord, disagreement

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / 'templates'
REPORT_TEMPLATE = 'run_report.md.j2'


@dataclass
class RunSummary:
    """Headline numbers of one run, mirrored into metrics.json and the report"""
    name: str
    stop_index: int
    stop_reason: str
    initial_disagreement: float
    final_disagreement: float
    consensus_value_error: float
    horizon_disagreement: float
    wall_time_s: float
    formation: Dict[str, Any] = field(default_factory=dict)


def _formation_details(loaded: LoadedScenario, record: TrajectoryRecord) -> Dict[str, Any]:
    context = loaded.scenario.formation
    if context is None:
        return {}
    positions, velocities = formation_error_components(record, context.spec)
    final = physical_sample(record.final(), context)
    details = {
        'final_position_error_m': positions[-1],
        'final_velocity_error_m_s': velocities[-1],
        'adjacent_separations_m': adjacent_separations(final.X[:, :3]),
    }
    if loaded.force_units and context.mass_kg is not None:
        peak = max(float(np.max(np.linalg.norm(physical_sample(s, context).U, axis=1)))
                   for s in record.samples)
        details['max_control_force_N'] = context.mass_kg * peak
    return details


def summarize(loaded: LoadedScenario, record: TrajectoryRecord, metrics: Metrics,
              wall_time_s: float) -> RunSummary:
    """Collect the headline numbers of a finished run"""
    return RunSummary(
        name=loaded.name,
        stop_index=metrics.stop_index,
        stop_reason=metrics.stop_reason.value,
        initial_disagreement=metrics.initial_disagreement,
        final_disagreement=metrics.final_disagreement,
        consensus_value_error=metrics.consensus_value_error[-1],
        horizon_disagreement=disagreement(record.final().X),
        wall_time_s=wall_time_s,
        formation=_formation_details(loaded, record),
    )


def _frame(loaded: LoadedScenario, sample):
    context = loaded.scenario.formation
    return physical_sample(sample, context) if context is not None else sample


def write_trajectory_csv(path: Path, loaded: LoadedScenario, record: TrajectoryRecord) -> None:
    plant = loaded.scenario.plant
    header = (['t', 'agent', 'k'] + [f'x{i}' for i in range(1, plant.n + 1)]
              + [f'u{i}' for i in range(1, plant.m + 1)])
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for sample in record.samples:
            sample = _frame(loaded, sample)
            for agent in range(sample.X.shape[0]):
                writer.writerow([repr(float(sample.t)), agent + 1, sample.k]
                                + [repr(float(v)) for v in sample.X[agent]]
                                + [repr(float(v)) for v in sample.U[agent]])


def write_instants_csv(path: Path, loaded: LoadedScenario, record: TrajectoryRecord) -> None:
    n = loaded.scenario.plant.n
    offsets = loaded.scenario.formation.spec.offsets if loaded.scenario.formation is not None else None
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['k', 't', 'agent'] + [f'x{i}' for i in range(1, n + 1)])
        for k, (tk, X) in enumerate(record.instants):
            if offsets is not None:
                X = np.array(X)
                X[:, :3] += offsets
            for agent in range(X.shape[0]):
                writer.writerow([k, repr(float(tk)), agent + 1] + [repr(float(v)) for v in X[agent]])


def metrics_document(summary: RunSummary, metrics: Metrics) -> Dict[str, Any]:
    document = asdict(summary)
    document.update({
        'disagreement_per_instant': metrics.disagreement_per_instant,
        'predicted_disagreement': metrics.predicted_disagreement,
        'consensus_value_error_per_instant': metrics.consensus_value_error,
    })
    return document


def write_metrics_json(path: Path, summary: RunSummary, metrics: Metrics) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(metrics_document(summary, metrics), f, indent=2)


def sci_filter(value, digits: int = 3) -> str:
    """Format a number in scientific notation for the report"""
    return f"{float(value):.{digits}e}"


def render_report(summary: RunSummary, loaded: LoadedScenario,
                  template_path: Optional[Path] = None) -> str:
    """Render the markdown run report"""
    template_path = template_path or TEMPLATE_DIR / REPORT_TEMPLATE
    with open(template_path, 'r', encoding='utf-8') as f:
        template_content = f.read()

    env = Environment(loader=BaseLoader())
    env.filters['sci'] = sci_filter
    template = env.from_string(template_content)

    s = loaded.scenario
    return template.render(
        summary=summary,
        description=loaded.description,
        agent_count=s.agent_count,
        n=s.plant.n,
        m=s.plant.m,
        Ts=s.schedule.Ts,
        t0=s.schedule.t0,
        k_max=s.schedule.k_max,
        edges=s.graph.sorted_edges(),
        metadata=loaded.metadata,
    )


def write_outputs(out_dir: Path, loaded: LoadedScenario, record: TrajectoryRecord, metrics: Metrics,
                  summary: RunSummary, names: OutputNames = OutputNames(),
                  report: bool = True) -> List[Path]:
    """
    Write every artifact of a run into out_dir.

    Returns:
        Paths written, in the order trajectory, instants, metrics, report
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [out_dir / names.trajectory, out_dir / names.instants, out_dir / names.metrics]
    write_trajectory_csv(written[0], loaded, record)
    write_instants_csv(written[1], loaded, record)
    write_metrics_json(written[2], summary, metrics)
    if report:
        report_path = out_dir / names.report
        report_path.write_text(render_report(summary, loaded), encoding='utf-8')
        written.append(report_path)
    logger.info("wrote %d files to %s", len(written), out_dir)
    return written
