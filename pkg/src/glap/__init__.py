"""Content-aware Pannini rendering of wide-FoV viewports from 360-degree images."""

__version__ = "0.1.0"

from .projections import (  # noqa: E402
    GeneralPerspective,
    PanniniParams,
    PlanePoint,
    ProjectionDomainError,
    SpherePoint,
    ViewportSpec,
    gpp_forward,
    pannini_backward,
    pannini_forward,
    rectilinear_forward,
    rotate_to_vd,
    unrotate_from_vd,
    viewport_plane_extent,
)
from .imaging import Raster, cube_to_eri, eri_to_cube, render_viewport, sample_eri  # noqa: E402
from .segmentation import connected_components, render_seg_viewport  # noqa: E402
from .measures import bending_score, stretching_score  # noqa: E402
from .global_opt import optimize_global  # noqa: E402
from .mesh import (  # noqa: E402
    EnergyWeights,
    VertexMesh,
    build_meshes,
    correction_strength,
    energy_total,
    flow_mask,
    grid_to_plane,
    optimize_mesh,
)
from .warp import upsample_mesh, warp_image  # noqa: E402
