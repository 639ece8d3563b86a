"""
Numerical constants loader
Reads the per-module YAML constants (schedules, thresholds, sample sizes)
"""

import copy
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from nsflow.core.config import settings
from nsflow.core.logging import logger

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "setcalc": {"selection_k0": 8, "selection_max_levels": 10, "selection_tol": 1e-8, "vertex_pair_limit": 4096},
    "rhsmodel": {
        "points": 2000,
        "pairs": 10000,
        "near_fraction": 0.5,
        "scales": [1e-3, 1e-4, 1e-5, 1e-6],
        "divergence_ratio": 5.0,
        "coverage_min": 0.9,
        "time_bins": 10,
    },
    "ggraph": {
        "delta_exponents": [3, 12],
        "eps_exponents": [1, 20],
        "y_points": 33,
        "cluster_tol": 1e-3,
        "monotone_tol": 1e-2,
        "composition_probes": 9,
    },
    "solvers": {
        "carath_k0": 16,
        "carath_substeps": 8,
        "carath_max_levels": 10,
        "carath_tol": 1e-6,
        "cauchy_tol": 1e-4,
        "min_subgrid": 5,
        "inclusion_tol": 1e-5,
        "shadow_tol": 1e-2,
        "dense_refine": 4,
        "mollifier_nodes": 24,
        "shadow_times": 41,
        "semigroup_points": 5,
    },
    "transport": {
        "flow_grid": 201,
        "collapse_tol": 1e-9,
        "atom_merge_tol": 1e-8,
        "bisection_steps": 48,
        "pairing_width": 0.1,
        "gauss_nodes": 6,
        "density_order": 4,
        "time_panels": 16,
        "bank_size": 10,
        "resolvent_cutoff": 1e-10,
        "resolvent_stencil": 1e-3,
        "resolvent_spacing": 1e-2,
    },
    "energy": {"slack": 0.05},
    "microlocal": {
        "nodes_per_period": 20,
        "max_nodes": 1 << 20,
        "omega_range": [1.0, 400.0],
        "omega_count": 48,
        "lambda_range": [8.0, 256.0],
        "lambda_count": 24,
        "decay_threshold": -6.0,
        "window_radius": 0.06,
        "direction_count": 16,
        "amplitude_floor": 1e-10,
        "stable_eps": 3,
    },
}


class NumericsConfigLoader:
    """Loads per-module numerical constants from YAML"""

    def __init__(self, config_dir: Optional[Path] = None):
        """
        Initialize config loader

        Args:
            config_dir: Directory containing defaults.yaml
                       Defaults to configs/numerics/
        """
        self.config_dir = Path(config_dir or settings.numerics_config_dir)
        self._cache: Optional[Dict[str, Dict[str, Any]]] = None

        if not self.config_dir.exists():
            logger.warning(f"Numerics config directory not found: {self.config_dir}")

    def load(self, force_reload: bool = False) -> Dict[str, Dict[str, Any]]:
        """Load constants merged over the built-in defaults"""
        if self._cache is not None and not force_reload:
            return self._cache

        merged = copy.deepcopy(DEFAULTS)
        config_file = self.config_dir / "defaults.yaml"

        if not config_file.exists():
            logger.warning(f"Numerics config not found: {config_file}, using built-in defaults")
            self._cache = merged
            return merged

        try:
            with open(config_file, "r", encoding="utf-8") as f:
                loaded = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Error loading numerics config: {e}")
            loaded = {}

        for section, values in loaded.items():
            if section not in merged:
                logger.warning(f"Ignoring unknown numerics section: {section}")
                continue
            merged[section].update(values or {})

        logger.debug(f"Loaded numerics constants from {config_file}")
        self._cache = merged
        return merged

    def section(self, name: str) -> Dict[str, Any]:
        """Constants of one module"""
        return self.load()[name]


@lru_cache(maxsize=1)
def get_numerics_config() -> NumericsConfigLoader:
    """Get cached loader instance"""
    return NumericsConfigLoader()


def numerics(section: str) -> Dict[str, Any]:
    """Shortcut for one module's constants"""
    return get_numerics_config().section(section)
