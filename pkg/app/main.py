from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from loguru import logger

from app.config import configure_logging
from app.errors import SelfSimError

# Importing models to ensure they are registered with SQLModel
from app.models import Run  # noqa: F401

from app.routes.algebraic import router as algebraic_router
from app.routes.dims import router as dims_router
from app.routes.ek import router as ek_router
from app.routes.fourier import router as fourier_router
from app.routes.ifs import router as ifs_router
from app.routes.runs import router as runs_router

# stdout in dev, app.log otherwise
configure_logging()

app = FastAPI(title="selfsim-decay")

app.include_router(ifs_router)
app.include_router(fourier_router)
app.include_router(ek_router)
app.include_router(algebraic_router)
app.include_router(dims_router)
app.include_router(runs_router)


@app.exception_handler(SelfSimError)
async def selfsim_error_handler(request: Request, exc: SelfSimError):
    logger.warning(f"{request.url.path}: {type(exc).__name__}: {exc}")
    return JSONResponse(status_code=exc.http_status,
                        content={"detail": str(exc), "error": type(exc).__name__})


@app.get("/")
async def read_root():
    return {"message": "selfsim-decay API is running!"}
