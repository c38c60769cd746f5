"""Numerical companion for percolation of Brownian loop soups.

Subpackages and modules:

* :mod:`loopsoup.special_fn` closed forms (f_infty, arcsine law, heat traces)
* :mod:`loopsoup.fixed_point` Banach iteration of the crossing operator T
* :mod:`loopsoup.soup1d` interval-covering Monte Carlo for the 1D soup
* :mod:`loopsoup.planar` planar kernels, walk on spheres, 2D soup clusters
* :mod:`loopsoup.capacity` log^alpha capacities of point clouds
* :mod:`loopsoup.cli` the ``loopsoup`` command
"""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .rng import RngStream, default_seed  # noqa: E402

__all__ = ["RngStream", "default_seed", "__version__"]
