"""Stateless HTTP inference API over one loaded checkpoint.

Clients hold latent vectors; every response echoes the request seed, and an
identical request with the same seed yields a byte-identical body. Error
responses: 400 for malformed bodies (field-level messages), 422 for
dimension or vocabulary mismatches, 500 with an opaque id otherwise.
"""

from __future__ import annotations

import hashlib
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .latent import apply_attribute, load_attribute_vectors, measure_tokens, slerp
from .midi import MODES
from .model import SAMPLED
from .nn import derive_rng
from .nn.tensor import no_grad
from .sequences import DRUMS, STEPS_PER_BAR
from .training import load_checkpoint


class ApiError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


class EncodeRequest(BaseModel):
    tokens: list[list[int]]
    seed: int = 0


class DecodeRequest(BaseModel):
    z: list[float] | list[str]
    temperature: float = 1.0
    seed: int = 0


class InterpolateRequest(BaseModel):
    tokens_a: list[list[int]]
    tokens_b: list[list[int]]
    alphas: list[float]
    temperature: float = 0.5
    seed: int = 0


class SampleRequest(BaseModel):
    n: int
    temperature: float = 1.0
    seed: int = 0


class MeasureRequest(BaseModel):
    tokens: list[list[int]]
    seed: int = 0


class ApplyRequest(BaseModel):
    kind: str
    scale: float
    z: list[float] | list[str] | None = None
    tokens: list[list[int]] | None = None
    temperature: float = 1.0
    seed: int = 0


def create_app(checkpoint_path: str | Path, attrs_path: str | Path | None = None, lossless: bool = False) -> FastAPI:
    checkpoint_path = Path(checkpoint_path)
    model, _, _ = load_checkpoint(checkpoint_path)
    checkpoint_hash = hashlib.sha256(checkpoint_path.read_bytes()).hexdigest()
    cfg = model.cfg
    vectors = load_attribute_vectors(attrs_path) if attrs_path else {}

    mode = None
    for name, (bars, kinds) in MODES.items():
        vocabs = tuple(512 if k == DRUMS else 130 for k in kinds)
        if bars * STEPS_PER_BAR == cfg.seq_len and vocabs == cfg.vocab_sizes:
            mode = name
            break
    melody_first = mode is not None and MODES[mode][1][0] != DRUMS

    app = FastAPI(title="barvae service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    # -- serialization helpers -------------------------------------------------

    def floats_out(arr: np.ndarray) -> list:
        values = [float(x) for x in np.asarray(arr).ravel()]
        if lossless:
            return [repr(v) for v in values]
        return values

    def parse_z(raw, field: str) -> np.ndarray:
        if len(raw) != cfg.latent_dim:
            raise ApiError(422, f"{field}: expected {cfg.latent_dim} values, got {len(raw)}")
        try:
            z = np.array([float(v) for v in raw], dtype=np.float64)
        except (TypeError, ValueError):
            raise ApiError(422, f"{field}: values must be numbers or decimal strings") from None
        if not np.all(np.isfinite(z)):
            raise ApiError(422, f"{field}: values must be finite")
        return z

    def parse_tokens(raw: list[list[int]], field: str) -> list[np.ndarray]:
        if len(raw) != cfg.num_streams:
            raise ApiError(422, f"{field}: expected {cfg.num_streams} streams, got {len(raw)}")
        streams = []
        for s, stream in enumerate(raw):
            if len(stream) != cfg.seq_len:
                raise ApiError(
                    422, f"{field}[{s}]: expected {cfg.seq_len} steps, got {len(stream)}"
                )
            arr = np.asarray(stream, dtype=np.int64)
            if arr.size and (arr.min() < 0 or arr.max() >= cfg.vocab_sizes[s]):
                raise ApiError(
                    422, f"{field}[{s}]: token outside vocabulary of {cfg.vocab_sizes[s]}"
                )
            streams.append(arr[None, :])
        return streams

    def tokens_out(res_tokens: list[np.ndarray], row: int) -> list[list[int]]:
        return [[int(t) for t in res_tokens[s][row]] for s in range(cfg.num_streams)]

    def check_temperature(value: float) -> None:
        if value < 0.0 or not np.isfinite(value):
            raise ApiError(422, "temperature must be finite and nonnegative")

    def melody_row(streams_row: list[list[int]]) -> np.ndarray:
        if not melody_first:
            raise ApiError(422, "attribute measurement needs a melody stream")
        return np.asarray(streams_row[0], dtype=np.int64)

    # -- endpoints ---------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok", "checkpoint": checkpoint_hash}

    @app.get("/config")
    def config():
        return {
            "arch": cfg.to_dict(),
            "mode": mode,
            "num_streams": cfg.num_streams,
            "vocab_sizes": list(cfg.vocab_sizes),
            "seq_len": cfg.seq_len,
            "latent_dim": cfg.latent_dim,
            "steps_per_bar": STEPS_PER_BAR,
            "attribute_kinds": sorted(vectors),
            "lossless": lossless,
            "checkpoint": checkpoint_hash,
        }

    @app.post("/encode")
    def encode(req: EncodeRequest):
        streams = parse_tokens(req.tokens, "tokens")
        with no_grad():
            mu, sigma = model.encode(streams)
        return {
            "mu": floats_out(mu.data[0]),
            "sigma": floats_out(sigma.data[0]),
            "seed": req.seed,
        }

    @app.post("/decode")
    def decode(req: DecodeRequest):
        check_temperature(req.temperature)
        z = parse_z(req.z, "z").astype(cfg.np_dtype)[None, :]
        res = model.decode(
            z, mode=SAMPLED, temperature=req.temperature, rng=derive_rng(req.seed, "decode")
        )
        return {"tokens": tokens_out(res.tokens, 0), "seed": req.seed}

    @app.post("/interpolate")
    def interpolate(req: InterpolateRequest):
        check_temperature(req.temperature)
        if not req.alphas:
            raise ApiError(422, "alphas: need at least one value")
        for alpha in req.alphas:
            if not 0.0 <= alpha <= 1.0:
                raise ApiError(422, f"alphas: {alpha} outside [0, 1]")
        a = parse_tokens(req.tokens_a, "tokens_a")
        b = parse_tokens(req.tokens_b, "tokens_b")
        z_a = model.encode_mean(a)[0].astype(np.float64)
        z_b = model.encode_mean(b)[0].astype(np.float64)
        try:
            z = np.stack([slerp(z_a, z_b, float(al)) for al in req.alphas])
        except ValueError as exc:
            raise ApiError(422, str(exc)) from None
        res = model.decode(
            z.astype(cfg.np_dtype),
            mode=SAMPLED,
            temperature=req.temperature,
            rng=derive_rng(req.seed, "interpolate"),
        )
        sequences = [tokens_out(res.tokens, i) for i in range(len(req.alphas))]
        return {"sequences": sequences, "alphas": list(req.alphas), "seed": req.seed}

    @app.post("/sample")
    def sample(req: SampleRequest):
        check_temperature(req.temperature)
        if req.n < 0:
            raise ApiError(422, "n must be nonnegative")
        if req.n > 256:
            raise ApiError(422, "n must be at most 256")
        samples = model.sample_prior(req.n, req.temperature, req.seed)
        sequences = [[[int(t) for t in stream] for stream in streams] for streams in samples]
        return {"sequences": sequences, "seed": req.seed}

    @app.post("/attrs/measure")
    def attrs_measure(req: MeasureRequest):
        streams = parse_tokens(req.tokens, "tokens")
        melody = melody_row([stream[0] for stream in streams])
        return {"attributes": measure_tokens(melody), "seed": req.seed}

    @app.post("/attrs/apply")
    def attrs_apply(req: ApplyRequest):
        check_temperature(req.temperature)
        if req.kind not in vectors:
            raise ApiError(422, f"unknown attribute kind {req.kind!r}; loaded: {sorted(vectors)}")
        if not np.isfinite(req.scale):
            raise ApiError(422, "scale must be finite")
        if (req.z is None) == (req.tokens is None):
            raise ApiError(422, "provide exactly one of z or tokens")
        if req.z is not None:
            z = parse_z(req.z, "z")
        else:
            streams = parse_tokens(req.tokens, "tokens")
            z = model.encode_mean(streams)[0].astype(np.float64)
        shifted = apply_attribute(z, vectors[req.kind], req.scale)

        def decode_row(latent: np.ndarray) -> list[list[int]]:
            res = model.decode(
                latent.astype(cfg.np_dtype)[None, :],
                mode=SAMPLED,
                temperature=req.temperature,
                rng=derive_rng(req.seed, "apply"),
            )
            return tokens_out(res.tokens, 0)

        base_tokens = decode_row(z)
        out_tokens = decode_row(shifted)
        return {
            "tokens": out_tokens,
            "z": floats_out(shifted),
            "measured_before": measure_tokens(melody_row(base_tokens)),
            "measured_after": measure_tokens(melody_row(out_tokens)),
            "seed": req.seed,
        }

    # -- error mapping -------------------------------------------------------------

    @app.exception_handler(ApiError)
    async def on_api_error(_: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail})

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(_: Request, exc: RequestValidationError):
        fields = [
            {"field": ".".join(str(p) for p in err["loc"] if p != "body"), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": fields})

    @app.exception_handler(Exception)
    async def on_internal_error(_: Request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content={"detail": "internal error", "error_id": uuid.uuid4().hex},
        )

    return app
