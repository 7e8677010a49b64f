"""HTTP/JSON API over the platform, all paths under /api/v1.

Errors surface as {"code", "message"} JSON with conventional status codes.
Mutating endpoints honor an Idempotency-Key header: a retried request returns
the originally recorded response without re-executing. Responses serialize
with sorted keys so identical state yields identical bytes across restarts.
"""

from __future__ import annotations

import json
import typing
from pathlib import Path

from fastapi import Depends, FastAPI, File, Form, Header, Request, UploadFile
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles


class CanonicalJSONResponse(JSONResponse):
    def render(self, content: typing.Any) -> bytes:
        return json.dumps(
            content, ensure_ascii=False, allow_nan=False, sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")

from .errors import (
    AlreadyExpertResolved,
    AuthFailure,
    BackendUnavailable,
    BadCursor,
    BadFilter,
    EmptyImage,
    EntobaseError,
    NoSuchObservation,
    NotExpert,
    NotResolvable,
    ObservationQuarantined,
    OutOfRangeCoordinates,
    StorageFailure,
    TaxonomyViolation,
    UndecodableImage,
    UnknownTaxon,
    UnknownTaxonInVote,
)
from .platform import Platform

API_PREFIX = "/api/v1"

STATUS_FOR = {
    BadFilter: 400,
    BadCursor: 400,
    UndecodableImage: 400,
    EmptyImage: 400,
    OutOfRangeCoordinates: 400,
    TaxonomyViolation: 400,
    AuthFailure: 401,
    NotExpert: 403,
    NoSuchObservation: 404,
    UnknownTaxon: 404,
    UnknownTaxonInVote: 404,
    ObservationQuarantined: 409,
    AlreadyExpertResolved: 409,
    NotResolvable: 409,
    BackendUnavailable: 503,
    StorageFailure: 500,
}


def _error_response(exc: EntobaseError) -> JSONResponse:
    status = STATUS_FOR.get(type(exc), 500)
    return CanonicalJSONResponse(
        status_code=status, content={"code": exc.code, "message": str(exc)}
    )


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="entobase", version="0.1.0", default_response_class=CanonicalJSONResponse)
    app.state.platform = platform

    @app.exception_handler(EntobaseError)
    async def handle_domain_error(_request: Request, exc: EntobaseError):
        return _error_response(exc)

    def current_user(authorization: str | None = Header(default=None)) -> dict:
        token = ""
        if authorization and authorization.lower().startswith("bearer "):
            token = authorization[7:].strip()
        user = platform.user_for_token(token)
        if user is None:
            raise AuthFailure("missing or invalid bearer token")
        return user

    @app.exception_handler(Exception)
    async def handle_unexpected(_request: Request, exc: Exception):
        if isinstance(exc, EntobaseError):
            return _error_response(exc)
        return CanonicalJSONResponse(
            status_code=500, content={"code": "internal_error", "message": str(exc)}
        )

    @app.get("/healthz")
    async def healthz():
        return {"ok": True, "taxonomy_version": platform.taxonomy.version}

    @app.get(API_PREFIX + "/me")
    def me(user: dict = Depends(current_user)):
        return {"user_id": user["user_id"], "is_expert": user["is_expert"]}

    @app.post(API_PREFIX + "/observations")
    def submit_observation(
        image: UploadFile = File(...),
        metadata: str = Form(...),
        user: dict = Depends(current_user),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        try:
            meta = json.loads(metadata)
            latitude = float(meta["latitude"])
            longitude = float(meta["longitude"])
            captured_at = int(meta["captured_at"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BadFilter(f"metadata must carry latitude, longitude, captured_at: {exc}")
        record = platform.submit_observation(
            image.file.read(),
            latitude=latitude,
            longitude=longitude,
            captured_at=captured_at,
            user_id=user["user_id"],
            idem_key=idempotency_key,
        )
        return CanonicalJSONResponse(status_code=201, content=record)

    @app.get(API_PREFIX + "/observations/{observation_id}")
    def get_observation(observation_id: str):
        return platform.render_observation(observation_id, detail=True)

    @app.get(API_PREFIX + "/observations")
    def list_observations(
        status: str | None = None,
        taxon: str | None = None,
        cursor: str | None = None,
        limit: int = 50,
    ):
        return platform.list_observations(status=status, taxon=taxon, cursor=cursor, limit=limit)

    @app.post(API_PREFIX + "/observations/{observation_id}/votes")
    def cast_vote(
        observation_id: str,
        payload: dict,
        user: dict = Depends(current_user),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        taxon_id = str(payload.get("taxon_id", ""))
        result = platform.propose_identification(
            observation_id, user["user_id"], taxon_id, idem_key=idempotency_key
        )
        return result

    @app.post(API_PREFIX + "/observations/{observation_id}/resolve")
    def resolve(
        observation_id: str,
        payload: dict,
        user: dict = Depends(current_user),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        taxon_id = str(payload.get("taxon_id", ""))
        result = platform.expert_resolve(
            observation_id, user["user_id"], taxon_id, idem_key=idempotency_key
        )
        return result

    @app.get(API_PREFIX + "/disputed")
    def disputed(cursor: str | None = None, limit: int = 50):
        return platform.list_disputed(cursor=cursor, limit=limit)

    @app.get(API_PREFIX + "/demography")
    def demography_rows(taxon: str, cell_size: float | None = None):
        rows = platform.demography_report(taxon, cell_size)
        return {
            "taxon": taxon,
            "rows": [
                {
                    "taxon_id": r.taxon_id,
                    "lat_idx": r.cell.lat_idx,
                    "lon_idx": r.cell.lon_idx,
                    "cell_size": r.cell.cell_size_deg,
                    "year": r.year,
                    "month": r.month,
                    "count": r.count,
                    "total": r.total_in_cell_bucket,
                    "relative_frequency": r.relative_frequency,
                }
                for r in rows
            ],
        }

    @app.get(API_PREFIX + "/novelty")
    def novelty_rows(cell_size: float | None = None):
        events = platform.novelty_report(cell_size)
        return {
            "events": [
                {
                    "taxon_id": e.taxon_id,
                    "lat_idx": e.cell.lat_idx,
                    "lon_idx": e.cell.lon_idx,
                    "first_timestamp": e.first_timestamp,
                    "observation_id": e.observation_id,
                }
                for e in events
            ]
        }

    @app.get(API_PREFIX + "/taxonomy")
    def taxonomy_tree():
        return platform.taxonomy_view()

    @app.get(API_PREFIX + "/taxonomy/{taxon_id}")
    def taxonomy_node(taxon_id: str):
        return platform.taxon_view(taxon_id)

    @app.get(API_PREFIX + "/images/{ref}")
    def image_blob(ref: str):
        if not platform.store.blobs.has(ref):
            raise NoSuchObservation(f"no image {ref}")
        return Response(content=platform.store.blobs.get(ref), media_type="image/png")

    ui_dist = platform.config.ui_dist
    if ui_dist and Path(ui_dist).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dist, html=True), name="ui")

    return app
