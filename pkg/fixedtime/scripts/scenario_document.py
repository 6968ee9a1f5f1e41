"""
Scenario Documents

Reads and writes the YAML scenario format:

    name: ring6
    plant: {builtin: double_integrator, dimension: 2}   # or {A: [[..]], B: [[..]]}
    graph: {agent_count: 6, edges: [{from: 1, to: 2}, [2, 3], ...]}
    schedule: {t0: 0, Ts: 10, Ts_unit: s, k_max: 150, delta_min: 1.0e-8}
    initial_states: [[..], ...]             # formation: [{r: [..], v: [..]}, ...]
    formation: {offsets: [[..], ...]}       # requires builtin hill
    metadata: {mass_kg: 410}
    output: {dense_points_per_interval: 20, force_units: false}

Every mapping and sequence node keeps its source line, so a failure is
reported as `path:line: [field] message`.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from errors import ConsensusError, ScenarioDocumentError
from graph import DirectedGraph, from_edges
from hill import FormationSpec, HillParams, formation_scenario, hill_params_from_orbit, hill_plant
from protocol import PlantModel, SamplingSchedule, double_integrator, harmonic_oscillator, single_integrator
from settings import ProjectSettings
from sim import Scenario

logger = logging.getLogger(__name__)

SECONDS_PER_UNIT = {'s': 1.0, 'h': 3600.0}

BUILTIN_PLANTS = ('single_integrator', 'double_integrator', 'harmonic_oscillator', 'hill')


@dataclass
class LoadedScenario:
    """A parsed scenario together with the document details needed to write it back"""
    name: str
    scenario: Scenario
    plant_section: Dict[str, Any]
    description: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)
    force_units: bool = False
    source: Optional[Path] = None


def _line_index(node, path: Tuple = (), index: Optional[Dict] = None) -> Dict[Tuple, int]:
    """Map each key/position path to its 1-based source line"""
    if index is None:
        index = {}
    index[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            _line_index(value_node, path + (key_node.value,), index)
    elif isinstance(node, yaml.SequenceNode):
        for position, item in enumerate(node.value):
            _line_index(item, path + (position,), index)
    return index


class DocumentReader:
    """Turns one parsed YAML document into scenario objects with anchored diagnostics"""

    def __init__(self, text: str, source: Optional[str] = None,
                 settings: Optional[ProjectSettings] = None):
        self.source = source or "<document>"
        self.settings = settings or ProjectSettings()
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, 'problem_mark', None)
            line = mark.line + 1 if mark is not None else None
            raise ScenarioDocumentError(f"invalid YAML: {getattr(e, 'problem', e)}", self.source, line) from e
        if not isinstance(self.data, dict):
            raise ScenarioDocumentError("scenario document must be a mapping", self.source, 1)
        self.lines = _line_index(root)

    # Diagnostics

    def line(self, path: Tuple) -> Optional[int]:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return self.lines.get(())

    def fail(self, message: str, *path) -> ScenarioDocumentError:
        field_name = '.'.join(str(part) for part in path) or None
        return ScenarioDocumentError(message, self.source, self.line(tuple(path)), field_name)

    # Typed accessors

    def section(self, name: str, required: bool = True) -> Dict[str, Any]:
        value = self.data.get(name)
        if value is None:
            if required:
                raise self.fail(f"missing required section '{name}'", name)
            return {}
        if not isinstance(value, dict):
            raise self.fail(f"section '{name}' must be a mapping", name)
        return value

    def number(self, value, *path) -> float:
        # PyYAML reads exponent forms without a dot (1e-6) as strings
        if isinstance(value, bool):
            raise self.fail(f"expected a number, got {value!r}", *path)
        try:
            result = float(value)
        except (TypeError, ValueError):
            raise self.fail(f"expected a number, got {value!r}", *path) from None
        if not np.isfinite(result):
            raise self.fail("number must be finite", *path)
        return result

    def integer(self, value, *path) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(f"expected an integer, got {value!r}", *path)
        return value

    def vector(self, value, *path) -> List[float]:
        if not isinstance(value, list) or not value:
            raise self.fail("expected a non-empty list of numbers", *path)
        return [self.number(item, *path, i) for i, item in enumerate(value)]

    def matrix(self, value, *path) -> List[List[float]]:
        if not isinstance(value, list) or not value:
            raise self.fail("expected a non-empty list of rows", *path)
        rows = [self.vector(row, *path, i) for i, row in enumerate(value)]
        if len({len(row) for row in rows}) != 1:
            raise self.fail("matrix rows must all have the same length", *path)
        return rows

    # Sections

    def plant(self, require_controllable: bool = True) -> Tuple[PlantModel, Dict[str, Any], Optional[HillParams]]:
        """Parse the plant section; returns the plant, its normalized section and Hill parameters"""
        section = self.section('plant')
        builtin = section.get('builtin')
        try:
            if builtin is None:
                if 'A' not in section or 'B' not in section:
                    raise self.fail("plant needs either 'builtin' or both 'A' and 'B'", 'plant')
                A = self.matrix(section['A'], 'plant', 'A')
                B = self.matrix(section['B'], 'plant', 'B')
                return PlantModel(A, B, require_controllable=require_controllable), {'A': A, 'B': B}, None
            return self._builtin_plant(builtin, section, require_controllable)
        except ScenarioDocumentError:
            raise
        except ConsensusError as e:
            raise self.fail(str(e), 'plant') from e

    def _builtin_plant(self, builtin, section, require_controllable: bool = True):
        if builtin not in BUILTIN_PLANTS:
            raise self.fail(f"unknown builtin plant {builtin!r}; expected one of {', '.join(BUILTIN_PLANTS)}",
                            'plant', 'builtin')
        normalized: Dict[str, Any] = {'builtin': builtin}

        if builtin in ('single_integrator', 'double_integrator'):
            dimension = self.integer(section.get('dimension', 1), 'plant', 'dimension')
            if dimension < 1:
                raise self.fail("dimension must be >= 1", 'plant', 'dimension')
            normalized['dimension'] = dimension
            maker = single_integrator if builtin == 'single_integrator' else double_integrator
            return maker(dimension), normalized, None

        if builtin == 'harmonic_oscillator':
            if 'omega' not in section:
                raise self.fail("harmonic_oscillator needs 'omega'", 'plant')
            omega = self.number(section['omega'], 'plant', 'omega')
            normalized['omega'] = omega
            return harmonic_oscillator(omega, require_controllable), normalized, None

        if 'n_r' in section:
            n_r = self.number(section['n_r'], 'plant', 'n_r')
            R0 = self.number(section['R0'], 'plant', 'R0') if 'R0' in section else None
            mu = self.number(section['mu'], 'plant', 'mu') if 'mu' in section else None
            params = HillParams(n_r=n_r, R0=R0, mu=mu)
        elif 'R0' in section and 'mu' in section:
            params = hill_params_from_orbit(self.number(section['R0'], 'plant', 'R0'),
                                            self.number(section['mu'], 'plant', 'mu'))
        else:
            raise self.fail("hill plant needs 'n_r' or both 'R0' and 'mu'", 'plant')
        for key in ('n_r', 'R0', 'mu'):
            if key in section:
                normalized[key] = self.number(section[key], 'plant', key)
        return hill_plant(params), normalized, params

    def graph(self) -> DirectedGraph:
        section = self.section('graph')
        if 'agent_count' not in section:
            raise self.fail("graph needs 'agent_count'", 'graph')
        agent_count = self.integer(section['agent_count'], 'graph', 'agent_count')
        edges = []
        raw_edges = section.get('edges') or []
        if not isinstance(raw_edges, list):
            raise self.fail("edges must be a list", 'graph', 'edges')
        for position, entry in enumerate(raw_edges):
            where = ('graph', 'edges', position)
            if isinstance(entry, dict):
                if set(entry) != {'from', 'to'}:
                    raise self.fail("edge mapping needs exactly 'from' and 'to'", *where)
                pair = (entry['from'], entry['to'])
            elif isinstance(entry, list) and len(entry) == 2:
                pair = (entry[0], entry[1])
            else:
                raise self.fail("edge must be {from, to} or a two-element list", *where)
            edges.append((self.integer(pair[0], *where), self.integer(pair[1], *where)))
        try:
            return from_edges(agent_count, edges)
        except ConsensusError as e:
            raise self.fail(str(e), 'graph') from e

    def schedule(self) -> SamplingSchedule:
        section = self.section('schedule')
        if 'Ts' not in section:
            raise self.fail("schedule needs 'Ts'", 'schedule')
        unit = section.get('Ts_unit', 's')
        if unit not in SECONDS_PER_UNIT:
            raise self.fail(f"Ts_unit must be one of {', '.join(SECONDS_PER_UNIT)}", 'schedule', 'Ts_unit')
        Ts = self.number(section['Ts'], 'schedule', 'Ts') * SECONDS_PER_UNIT[unit]
        t0 = self.number(section.get('t0', 0.0), 'schedule', 't0')
        k_max = self.integer(section.get('k_max', self.settings.k_max_default), 'schedule', 'k_max')
        if 'delta_min' in section:
            delta_min = self.number(section['delta_min'], 'schedule', 'delta_min')
        else:
            delta_min = self.settings.delta_min_fraction * Ts
        try:
            return SamplingSchedule(t0=t0, Ts=Ts, k_max=k_max, delta_min=delta_min)
        except ConsensusError as e:
            raise self.fail(str(e), 'schedule') from e

    def initial_states(self, agent_count: int, n: int, formation: bool) -> list:
        raw = self.data.get('initial_states')
        if not isinstance(raw, list):
            raise self.fail("initial_states must be a list with one entry per agent", 'initial_states')
        if len(raw) != agent_count:
            raise self.fail(f"initial_states has {len(raw)} entries for {agent_count} agents", 'initial_states')
        states = []
        for i, entry in enumerate(raw):
            where = ('initial_states', i)
            if isinstance(entry, dict):
                if not formation or set(entry) != {'r', 'v'}:
                    raise self.fail("mapping entries {r, v} are only valid for formation scenarios", *where)
                r = self.vector(entry['r'], *where, 'r')
                v = self.vector(entry['v'], *where, 'v')
                if len(r) != 3 or len(v) != 3:
                    raise self.fail("r and v must have three components", *where)
                states.append(r + v)
            else:
                state = self.vector(entry, *where)
                if len(state) != n:
                    raise self.fail(f"state has {len(state)} entries, plant has n={n}", *where)
                states.append(state)
        return states

    # Assembly

    def scenario(self) -> LoadedScenario:
        plant, plant_section, params = self.plant()
        G = self.graph()
        schedule = self.schedule()
        output = self.section('output', required=False)
        dense = self.integer(output.get('dense_points_per_interval', self.settings.dense_points_per_interval),
                             'output', 'dense_points_per_interval')
        metadata = self.data.get('metadata') or {}
        if not isinstance(metadata, dict):
            raise self.fail("metadata must be a mapping", 'metadata')

        formation = self.section('formation', required=False)
        if formation and params is None:
            raise self.fail("formation scenarios need the hill builtin plant", 'formation')
        states = self.initial_states(G.agent_count, plant.n, bool(formation))

        try:
            if formation:
                offsets = self.matrix(formation.get('offsets'), 'formation', 'offsets')
                mass = metadata.get('mass_kg')
                scenario = formation_scenario(
                    params, FormationSpec(np.array(offsets)), G, states, schedule.Ts, t0=schedule.t0,
                    k_max=schedule.k_max, delta_min=schedule.delta_min, dense_points_per_interval=dense,
                    consensus_tolerance=self.settings.consensus_tolerance,
                    mass_kg=self.number(mass, 'metadata', 'mass_kg') if mass is not None else None)
            else:
                scenario = Scenario(graph=G, plant=plant, schedule=schedule, initial_states=np.array(states),
                                    dense_points_per_interval=dense,
                                    consensus_tolerance=self.settings.consensus_tolerance)
        except ScenarioDocumentError:
            raise
        except ConsensusError as e:
            raise self.fail(str(e), 'graph' if 'Assumption 1' in str(e) else 'initial_states') from e

        name = str(self.data.get('name') or Path(self.source).stem)
        return LoadedScenario(
            name=name, scenario=scenario, plant_section=plant_section,
            description=str(self.data.get('description') or ""), metadata=dict(metadata),
            force_units=bool(output.get('force_units', False)),
            source=Path(self.source) if self.source != "<document>" else None)


def read_document(path, settings: Optional[ProjectSettings] = None) -> DocumentReader:
    """Open a scenario file and prepare a reader for it"""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ScenarioDocumentError(f"cannot read scenario file: {e.strerror or e}", str(path)) from e
    return DocumentReader(text, str(path), settings)


def load_scenario(path, settings: Optional[ProjectSettings] = None) -> LoadedScenario:
    """
    Parse a scenario file into a validated Scenario.

    Raises:
        ScenarioDocumentError: with the file, line and field of the first problem
    """
    loaded = read_document(path, settings).scenario()
    logger.info("loaded scenario %s (%d agents, n=%d)", loaded.name,
                loaded.scenario.agent_count, loaded.scenario.plant.n)
    return loaded


def load_scenario_text(text: str, settings: Optional[ProjectSettings] = None,
                       source: Optional[str] = None) -> LoadedScenario:
    """Parse scenario YAML held in memory"""
    return DocumentReader(text, source, settings).scenario()


def load_plant(path, settings: Optional[ProjectSettings] = None) -> PlantModel:
    """Plant section only; uncontrollable plants are allowed so they can be diagnosed"""
    return read_document(path, settings).plant(require_controllable=False)[0]


def load_graph(path, settings: Optional[ProjectSettings] = None) -> DirectedGraph:
    """Graph section only"""
    return read_document(path, settings).graph()


def scenario_to_document(loaded: LoadedScenario) -> Dict[str, Any]:
    """Canonical mapping for a parsed scenario (times in seconds, every default explicit)"""
    s = loaded.scenario
    if s.formation is not None:
        states = [{'r': row[:3].tolist(), 'v': row[3:].tolist()} for row in s.formation.physical_initial]
    else:
        states = s.initial_states.tolist()

    document: Dict[str, Any] = {'name': loaded.name}
    if loaded.description:
        document['description'] = loaded.description
    document['plant'] = dict(loaded.plant_section)
    document['graph'] = {
        'agent_count': s.graph.agent_count,
        'edges': [{'from': a, 'to': b} for a, b in s.graph.sorted_edges()],
    }
    document['schedule'] = {
        't0': s.schedule.t0, 'Ts': s.schedule.Ts, 'Ts_unit': 's',
        'k_max': s.schedule.k_max, 'delta_min': s.schedule.delta_min,
    }
    document['initial_states'] = states
    if s.formation is not None:
        document['formation'] = {'offsets': s.formation.spec.offsets.tolist()}
    if loaded.metadata:
        document['metadata'] = dict(loaded.metadata)
    document['output'] = {'dense_points_per_interval': s.dense_points_per_interval,
                          'force_units': loaded.force_units}
    return document


def dump_scenario(loaded: LoadedScenario) -> str:
    """YAML text that parses back to an identical Scenario"""
    return yaml.safe_dump(scenario_to_document(loaded), sort_keys=False, default_flow_style=None)
