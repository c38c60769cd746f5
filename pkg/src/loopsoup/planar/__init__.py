"""Planar potential theory and the 2D loop soup."""

from .asymptotics import (DEFAULT_A, ThreeCrossingsBound, three_crossings_bound,
                          two_annuli_measure, two_annuli_measure_with_outer)
from .geometry import AnnulusSpec, Disc, Point2, UNIT_DISC
from .kernels import (annulus_crossing_measure, annulus_crossing_measure_dr1,
                      annulus_inner_kernel_series, annulus_kernel_total, bm_annulus_hit_inner,
                      disc_poisson_kernel, single_loop_crossing_prob)
from .soup2d import (ClusterForest, EventSpec, LoopPath, LoopSoup2D, SoupConfig, build_clusters,
                     crossing_event, crossing_scan, fkg_spot_check, sample_loop,
                     sample_loop_soup_2d, soup_loop_mass, surround_probability_scan, surrounds,
                     winding_number)
from .wos import (AbsorbingDomain, WosResult, annulus_hit_inner_wos, polar3_configuration,
                  polar3_leading_value, wos_hitting_prob)

__all__ = [name for name in dir() if not name.startswith("_")]
