"""Continuity-path laboratory: python surface over the C++ core."""

from _klab import (  # noqa: F401
    ConfigError,
    KlabError,
    abreu_scalar,
    config_hash,
    minimize_iota_on_orbit,
    moment_nodes,
    orbit_action,
    spectrum,
    toric_iota,
    torus_scalar_curvature,
    track_path,
    verify,
)

__all__ = [
    "ConfigError",
    "KlabError",
    "abreu_scalar",
    "config_hash",
    "minimize_iota_on_orbit",
    "moment_nodes",
    "orbit_action",
    "spectrum",
    "toric_iota",
    "torus_scalar_curvature",
    "track_path",
    "verify",
]
