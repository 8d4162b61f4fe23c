"""Document and service schemas.

One set of pydantic models backs everything: the JSON file formats the CLI
reads and writes, and the request/response bodies of the HTTP service.
All documents carry "version": 1 and reject unknown keys, so a typo in a
field name fails loudly with the offending path.

Layout conventions: dense numeric arrays are row-major nested lists in SI
units; 6-DOF poses are [rotation axis-angle (3), translation (3)].
"""

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


Vec3 = list[float]


class OriginSpec(StrictModel):
    rotation: Vec3 = Field(default_factory=lambda: [0.0, 0.0, 0.0])  # axis-angle
    translation: Vec3 = Field(default_factory=lambda: [0.0, 0.0, 0.0])


class LinkSpec(StrictModel):
    name: str
    mass: float
    inertia: list[Vec3]                 # 3x3 about the COM, link frame
    com_offset: Vec3 = Field(default_factory=lambda: [0.0, 0.0, 0.0])


class JointSpec(StrictModel):
    kind: Literal["free", "spherical", "revolute"]
    parent: str                         # link name or "world"
    child: str
    origin: OriginSpec = Field(default_factory=OriginSpec)
    axis: Optional[Vec3] = None         # revolute only


class ModelDocument(StrictModel):
    version: Literal[1] = 1
    links: list[LinkSpec]
    joints: list[JointSpec]


class PoseSpec(StrictModel):
    rotation: Vec3 = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    translation: Vec3 = Field(default_factory=lambda: [0.0, 0.0, 0.0])


class SurfaceSpec(StrictModel):
    """One geometry entry.

    `plane` needs point+normal; `sphere` center+radius; `box`
    half_extents (+pose); `mesh` either a path to an OBJ file or inline
    vertices/faces; `voxel` a path to a voxel grid file (converted to a
    boundary mesh on load).  attachment "object" binds the surface to the
    run's object pose trajectory.
    """

    type: Literal["plane", "sphere", "box", "mesh", "voxel"]
    attachment: Literal["static", "object"] = "static"
    pose: PoseSpec = Field(default_factory=PoseSpec)
    point: Optional[Vec3] = None
    normal: Optional[Vec3] = None
    center: Optional[Vec3] = None
    radius: Optional[float] = None
    half_extents: Optional[Vec3] = None
    path: Optional[str] = None
    vertices: Optional[list[Vec3]] = None
    faces: Optional[list[list[int]]] = None


class ContactPointSpec(StrictModel):
    body: str
    offset: Vec3
    role: Literal["scene", "object"]


class TrajectoryBlock(StrictModel):
    dt: float
    human: list[list[float]]                      # T x n
    object: Optional[list[list[float]]] = None    # T x 6


class ConfigBlock(StrictModel):
    """Contact-model overrides; omitted fields keep the defaults."""

    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    d0: Optional[float] = None
    d1: Optional[float] = None
    v0: Optional[float] = None
    eps: Optional[float] = None
    strict_normal: Optional[bool] = None


class ObjectModelSpec(StrictModel):
    mass: float
    inertia: list[Vec3]
    geometry: SurfaceSpec               # in the object's body frame


class SolutionBlock(StrictModel):
    tau: list[list[float]]              # T x n
    A: list                             # T x C_s x 4, (kappa, delta, rho, mu)
    B: list                             # T x C_o x 4


class ForcesBlock(StrictModel):
    scene: Optional[list] = None        # T x C_s x 3
    object: Optional[list] = None       # T x C_o x 3


class WeightsBlock(StrictModel):
    w_tau: float = 1e-4
    w_coef: float = 1e-10


class EnergyBlock(StrictModel):
    kinetic: list[float]
    grav_pe: list[float]
    spring_pe: list[float]
    friction_work: list[float]
    kinetic_friction_work: list[float]
    damping_work: list[float]


class RunDocument(StrictModel):
    """The run file: model, motion, geometry, contact layout, and
    optional solver inputs/outputs."""

    version: Literal[1] = 1
    model: Union[str, ModelDocument]    # path (relative to the file) or inline
    trajectory: TrajectoryBlock
    object_model: Optional[ObjectModelSpec] = None
    surfaces: list[SurfaceSpec] = Field(default_factory=list)
    contact_points: list[ContactPointSpec] = Field(default_factory=list)
    config: ConfigBlock = Field(default_factory=ConfigBlock)
    weights: WeightsBlock = Field(default_factory=WeightsBlock)
    actuation_mask: Optional[list[bool]] = None
    solution: Optional[SolutionBlock] = None
    forces: Optional[ForcesBlock] = None
    energy: Optional[EnergyBlock] = None
    gravity: Vec3 = Field(default_factory=lambda: [0.0, 0.0, -9.81])
    seed: int = 0


# --------------------------------------------------------------------------
# Service requests and responses


class HealthResponse(StrictModel):
    status: str
    version: str


class PresetInfo(StrictModel):
    name: str
    description: str


class PresetListResponse(StrictModel):
    presets: list[PresetInfo]


class SimulateOverrides(StrictModel):
    dt: Optional[float] = None
    duration: Optional[float] = None
    drop: Optional[float] = None
    theta_deg: Optional[float] = None
    mu: Optional[float] = None
    rho: Optional[float] = None
    kappa: Optional[float] = None
    delta: Optional[float] = None
    box_mass: Optional[float] = None
    angle: Optional[float] = None

    def as_kwargs(self):
        return {k: v for k, v in self.model_dump().items() if v is not None}


class SimulateRequest(StrictModel):
    preset: str
    overrides: SimulateOverrides = Field(default_factory=SimulateOverrides)


class SimulateResponse(StrictModel):
    run: RunDocument                    # complete; feedable to solve/residual
    audit_flagged_steps: list[int]
    friction_dissipation: float
    damping_dissipation: float


class SolveOptions(StrictModel):
    max_iters: int = 400
    threads: int = 1
    seed: Optional[int] = None
    start_frame: int = 0
    end_frame: Optional[int] = None


class SolveRequest(StrictModel):
    run: RunDocument
    options: SolveOptions = Field(default_factory=SolveOptions)


class ResidualSummary(StrictModel):
    aggregate: float
    max_frame_norm: float
    frame_norms: list[float]


class SolveResponse(StrictModel):
    converged: bool
    run: RunDocument                    # input run with the solution filled in
    objective_history: list[float]
    residual: ResidualSummary


class ResidualRequest(StrictModel):
    run: RunDocument                    # solution block required
    per_point: bool = False


class ResidualResponse(StrictModel):
    aggregate: float
    frame_norms_h: list[float]
    frame_norms_o: list[float]
    csv: str


class MetricPointSpec(StrictModel):
    body: str
    offset: Vec3


class MetricsOptions(StrictModel):
    collision_threshold: float = 0.04
    contact_threshold: float = 0.05
    ground_height: float = 0.0
    foot_height: float = 0.05
    hand_links: Optional[list[str]] = None
    body_points: Optional[list[MetricPointSpec]] = None
    hand_points: Optional[list[MetricPointSpec]] = None
    foot_points: Optional[list[MetricPointSpec]] = None


class MetricsRequest(StrictModel):
    pred: RunDocument
    gt: RunDocument
    options: MetricsOptions = Field(default_factory=MetricsOptions)


class MetricsResponse(StrictModel):
    report: dict[str, float]
    text: str
    csv: str


class GradcheckRequest(StrictModel):
    run: RunDocument
    samples: int = 10
    seed: Optional[int] = None


class GradcheckResponse(StrictModel):
    max_relative_error: float
    samples: int
    excluded_frames: list[int]
