"""HTTP service exposing the toolkit.

Run with:  uvicorn contactdyn.service.app:app

Numeric and validation failures surface as 422 responses with the error
message; run documents must inline their model (path references resolve
against the server's working directory).
"""

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, schemas
from ..errors import ContactDynError
from . import handlers

app = FastAPI(title="contactdyn", version=__version__)


@app.exception_handler(ContactDynError)
async def toolkit_error_handler(request, exc):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health", response_model=schemas.HealthResponse)
def health():
    return handlers.health()


@app.get("/presets", response_model=schemas.PresetListResponse)
def presets():
    return handlers.list_presets()


@app.post("/simulate", response_model=schemas.SimulateResponse)
def simulate(req: schemas.SimulateRequest):
    return handlers.simulate_preset(req)


@app.post("/solve", response_model=schemas.SolveResponse)
def solve(req: schemas.SolveRequest):
    return handlers.solve_run(req)


@app.post("/residual", response_model=schemas.ResidualResponse)
def residual(req: schemas.ResidualRequest):
    return handlers.residual_run(req)


@app.post("/metrics", response_model=schemas.MetricsResponse)
def metrics(req: schemas.MetricsRequest):
    return handlers.metrics_run(req)


@app.post("/gradcheck", response_model=schemas.GradcheckResponse)
def gradcheck(req: schemas.GradcheckRequest):
    return handlers.gradcheck_run(req)
