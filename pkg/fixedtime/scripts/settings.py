"""
Project Settings for the Fixed-Time Consensus Simulator

Loads numeric defaults and output preferences from dna.yml. Scenario documents
override these values per run; anything missing falls back to the defaults
declared on ProjectSettings.
"""

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OutputNames:
    """File names written by the simulate command"""
    trajectory: str = "trajectory.csv"
    instants: str = "instants.csv"
    metrics: str = "metrics.json"
    report: str = "report.md"


@dataclass(frozen=True)
class ProjectSettings:
    """Numeric defaults shared by every scenario"""
    k_max_default: int = 60
    delta_min_fraction: float = 1e-9
    consensus_tolerance: float = 1e-12
    rank_rtol: float = 1e-10
    power_iteration_tol: float = 1e-12
    power_iteration_max: int = 10000
    dense_points_per_interval: int = 20
    near_singular_det: float = 1e-12
    report_enabled: bool = True
    outputs: OutputNames = field(default_factory=OutputNames)


# dna.yml section -> settings attribute
_SECTION_KEYS = {
    'simulation': {
        'k_max': 'k_max_default',
        'delta_min_fraction': 'delta_min_fraction',
        'consensus_tolerance': 'consensus_tolerance',
        'dense_points_per_interval': 'dense_points_per_interval',
    },
    'numerics': {
        'rank_rtol': 'rank_rtol',
        'power_iteration_tol': 'power_iteration_tol',
        'power_iteration_max': 'power_iteration_max',
        'near_singular_det': 'near_singular_det',
    },
}


def find_dna_file(start_dir: Path) -> Optional[Path]:
    """Return the first dna.yml found in start_dir or up to two parents"""
    candidates = [
        start_dir / 'dna.yml',
        start_dir / '..' / 'dna.yml',
        start_dir / '..' / '..' / 'dna.yml',
    ]
    for candidate in candidates:
        if candidate.exists():
            return candidate.resolve()
    return None


def settings_from_mapping(data: Dict[str, Any]) -> ProjectSettings:
    """Build settings from an already-parsed dna.yml mapping"""
    defaults = ProjectSettings()
    values: Dict[str, Any] = {}
    types = {f.name: type(getattr(defaults, f.name)) for f in fields(ProjectSettings)}

    for section, mapping in _SECTION_KEYS.items():
        section_data = data.get(section) or {}
        for key, attr in mapping.items():
            if key in section_data:
                values[attr] = types[attr](section_data[key])

    output_data = data.get('output') or {}
    if 'report' in output_data:
        values['report_enabled'] = bool(output_data['report'])
    names = output_data.get('files') or {}
    values['outputs'] = OutputNames(**{
        key: str(names[key]) for key in ('trajectory', 'instants', 'metrics', 'report') if key in names
    })

    return ProjectSettings(**values)


def load_settings(start_dir: Optional[Path] = None) -> ProjectSettings:
    """
    Load project settings from dna.yml.

    Args:
        start_dir: Directory to start the dna.yml search from (defaults to cwd)

    Returns:
        ProjectSettings with dna.yml values layered over the built-in defaults
    """
    start_dir = Path(start_dir) if start_dir is not None else Path.cwd()
    dna_path = find_dna_file(start_dir)
    if dna_path is None:
        logger.debug("No dna.yml found from %s, using built-in defaults", start_dir)
        return ProjectSettings()

    try:
        with open(dna_path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
        settings = settings_from_mapping(data)
    except (OSError, yaml.YAMLError, TypeError, ValueError) as e:
        logger.warning("Could not read %s: %s; using built-in defaults", dna_path, e)
        return ProjectSettings()

    logger.debug("Loaded settings from %s", dna_path)
    return settings
