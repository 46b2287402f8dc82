"""Contract logic executed inside an endorsement sandbox.

Every operation runs read-then-write on the keys it owns, so the captured
read set makes same-key operations conflict under MVCC exactly when they
must: two consent updates to one key serialize across blocks, while
access requests (pure reads) never conflict with each other. Role
administration lives in its own three-segment keyspace and therefore
never collides with consent traffic.

Key touch counts per operation (reads union writes):

  grant/revoke consent   1
  assign/revoke role     1
  access request         2 for iws, n+1 for rws/rows (n = roster size),
                         1 when the role is not assigned (denied early)
"""

from __future__ import annotations

from consentledger.keys import (
    ROLE_ASSIGNED,
    ROLE_REVOKED,
    WorldStateDesign,
    encode_consent_key,
    encode_role_key,
    iws_key,
    rows_key,
    rws_key,
)
from consentledger.transactions import AccessGrantRecord, PayloadKind, TransactionPayload
from consentledger.worldstate import SimulationContext


class ContractError(Exception):
    """Raised when a payload cannot execute against the observed state."""


def _member_set(ctx: SimulationContext, key: str) -> frozenset:
    value = ctx.get_value(key)
    if value is None:
        return frozenset()
    if not isinstance(value, frozenset):
        raise ContractError(f"key {key!r} holds a marker, expected a member set")
    return value


def _update_consent(ctx: SimulationContext, payload: TransactionPayload,
                    design: WorldStateDesign) -> None:
    key, member = encode_consent_key(design, payload.fact)
    members = _member_set(ctx, key)
    if payload.kind is PayloadKind.GRANT_CONSENT:
        ctx.put(key, members | {member})
    else:
        ctx.put(key, members - {member})


def _update_role(ctx: SimulationContext, payload: TransactionPayload) -> None:
    key = encode_role_key(payload.role_id, payload.dc_id, payload.wd_id)
    current = ctx.get_value(key)
    if current is not None and not isinstance(current, str):
        raise ContractError(f"key {key!r} holds a member set, expected a marker")
    marker = (
        ROLE_ASSIGNED if payload.kind is PayloadKind.ASSIGN_ROLE else ROLE_REVOKED
    )
    ctx.put(key, marker)


def _access_request(ctx: SimulationContext, payload: TransactionPayload,
                    design: WorldStateDesign, roster) -> AccessGrantRecord:
    role_key = encode_role_key(payload.role_id, payload.dc_id, payload.wd_id)
    marker = ctx.get_value(role_key)
    if marker is not None and not isinstance(marker, str):
        raise ContractError(f"key {role_key!r} holds a member set, expected a marker")
    base = dict(
        dc_id=payload.dc_id,
        role_id=payload.role_id,
        wd_id=payload.wd_id,
        res_id=payload.res_id,
        time_id=payload.time_id,
    )
    if marker != ROLE_ASSIGNED:
        return AccessGrantRecord(granted=False, consenting_individuals=(), **base)
    consenting: list = []
    if design is WorldStateDesign.IWS:
        key = iws_key(payload.res_id, payload.wd_id, payload.role_id, payload.time_id)
        consenting = list(_member_set(ctx, key))
    elif design is WorldStateDesign.RWS:
        for ind_id in roster:
            key = rws_key(ind_id, payload.wd_id, payload.role_id, payload.time_id)
            if payload.res_id in _member_set(ctx, key):
                consenting.append(ind_id)
    else:
        for ind_id in roster:
            key = rows_key(payload.res_id, ind_id, payload.wd_id, payload.time_id)
            if payload.role_id in _member_set(ctx, key):
                consenting.append(ind_id)
    return AccessGrantRecord(
        granted=True, consenting_individuals=tuple(sorted(consenting)), **base
    )


def execute_payload(
    ctx: SimulationContext,
    payload: TransactionPayload,
    design: WorldStateDesign,
    roster,
) -> AccessGrantRecord | None:
    """Run one payload in the sandbox; returns the decision for access ops."""
    kind = payload.kind
    if kind in (PayloadKind.GRANT_CONSENT, PayloadKind.REVOKE_CONSENT):
        _update_consent(ctx, payload, design)
        return None
    if kind in (PayloadKind.ASSIGN_ROLE, PayloadKind.REVOKE_ROLE):
        _update_role(ctx, payload)
        return None
    if kind is PayloadKind.ACCESS_REQUEST:
        return _access_request(ctx, payload, design, roster)
    if kind is PayloadKind.RAW_READ:
        for key in payload.read_keys:
            ctx.get(key)
        return None
    if kind is PayloadKind.RAW_WRITE:
        for key, value in payload.write_items:
            ctx.put(key, value)
        return None
    raise ContractError(f"{kind.label} is applied at commit time, not simulated")
