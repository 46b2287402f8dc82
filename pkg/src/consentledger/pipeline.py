"""Execute-order-validate pipeline over the block log.

Stages, each its own thread(s), connected by bounded queues:

  clients -> [submission queues, one per endorser, round-robin routing]
          -> endorser workers (authorize, simulate m-of-k, stub)
          -> [ordered queue] -> orderer (per-client resequencing, cuts
             blocks at block_size or after block_timeout_ms)
          -> [block queue] -> committer (serial MVCC validation, hash
             chain append) -> [receipt queue] -> collector (final
             receipts, automatic re-endorsement of aborted transactions
             up to max_retries)

Round-robin routing gives each endorser an equal share of the load; the
orderer restores each client's submission order before cutting blocks, so
per-client FIFO survives parallel endorsement. Transactions rejected at
endorsement emit a gap notice so the resequencer never waits on a
sequence number that will not arrive. Retried transactions re-enter as a
synthetic "retry" client with their own sequence numbers.

Overload: a monitor samples the submission queues while clients are still
submitting; if every queue stays full for overload_window_s consecutive
seconds the run is declared overloaded and cancelled. Every in-flight
transaction then drains to a final cancelled receipt, so accounting stays
exact: committed + aborted + rejected + cancelled == submitted.

Config file format (one `key = value` per line, '#' comments):

    block_size = 100
    endorsers  = 2
    policy     = 1/2
    retries    = 16
    timeout_ms = 50
    threads    = 100

plus optional tuning keys: submission_depth, ordered_depth,
block_queue_depth, overload_window_s, stall_timeout_s, pre_endorsed.
With pre_endorsed = true the whole workload is endorsed before the clock
starts and the timed section covers ordering and commit only; overload is
then watched on the ordered queue.
"""

from __future__ import annotations

import enum
import queue
import threading
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

from consentledger.blocklog import (
    REASON_ENDORSEMENT,
    VALID,
    BlockLog,
    commit_block,
)
from consentledger.contracts import ContractError, execute_payload
from consentledger.keys import KeyCodecError, WorldStateDesign
from consentledger.membership import AuthorizationError, MembershipRegistry
from consentledger.preload import PreloadSpec
from consentledger.transactions import (
    EndorsedTransaction,
    TransactionPayload,
    endorsement_stub,
    state_init,
)
from consentledger.worldstate import (
    ReadWriteSet,
    SimulationContext,
    VersionedWorldState,
)


class ConfigError(ValueError):
    """Raised for malformed pipeline configuration."""


class PipelineStallError(RuntimeError):
    """Raised when a run stops finalizing receipts without being cancelled."""


class PipelineFault(RuntimeError):
    """Raised when a pipeline worker thread dies with an exception."""


@dataclass(frozen=True)
class PipelineConfig:
    block_size: int = 100
    endorsers: int = 2
    policy_m: int = 1
    max_retries: int = 16
    client_threads: int = 100
    block_timeout_ms: int = 50
    submission_depth: int = 8000
    ordered_depth: int = 512
    block_queue_depth: int = 8
    overload_window_s: float = 5.0
    stall_timeout_s: float = 120.0
    pre_endorsed: bool = False

    def validate(self) -> "PipelineConfig":
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        if self.endorsers < 1:
            raise ConfigError("endorsers must be >= 1")
        if not 1 <= self.policy_m <= self.endorsers:
            raise ConfigError(
                f"policy {self.policy_m}/{self.endorsers} needs 1 <= m <= endorsers"
            )
        if self.max_retries < 0:
            raise ConfigError("retries must be >= 0")
        if self.client_threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.block_timeout_ms < 1:
            raise ConfigError("timeout_ms must be >= 1")
        if self.submission_depth < self.endorsers:
            raise ConfigError("submission_depth must cover every endorser queue")
        return self

    def policy_text(self) -> str:
        return f"{self.policy_m}/{self.endorsers}"

    def per_endorser_depth(self) -> int:
        return max(1, self.submission_depth // self.endorsers)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        values = {}
        for lineno, raw in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        return cls.from_mapping(values, where=str(path))

    @classmethod
    def from_mapping(cls, values: dict, where: str = "config") -> "PipelineConfig":
        int_keys = {
            "block_size": "block_size",
            "endorsers": "endorsers",
            "retries": "max_retries",
            "timeout_ms": "block_timeout_ms",
            "threads": "client_threads",
            "submission_depth": "submission_depth",
            "ordered_depth": "ordered_depth",
            "block_queue_depth": "block_queue_depth",
        }
        float_keys = {
            "overload_window_s": "overload_window_s",
            "stall_timeout_s": "stall_timeout_s",
        }
        updates = {}
        for key, value in values.items():
            if key in int_keys:
                try:
                    updates[int_keys[key]] = int(value)
                except ValueError:
                    raise ConfigError(f"{where}: {key} must be an integer")
            elif key in float_keys:
                try:
                    updates[float_keys[key]] = float(value)
                except ValueError:
                    raise ConfigError(f"{where}: {key} must be a number")
            elif key == "policy":
                m, k = parse_policy(value)
                updates["policy_m"] = m
                updates.setdefault("endorsers", k)
            elif key == "pre_endorsed":
                lowered = value.lower()
                if lowered not in ("true", "false", "1", "0"):
                    raise ConfigError(f"{where}: pre_endorsed must be true or false")
                updates["pre_endorsed"] = lowered in ("true", "1")
            else:
                raise ConfigError(f"{where}: unknown key {key!r}")
        if "policy" in values and "endorsers" in values:
            m, k = parse_policy(values["policy"])
            if k != updates.get("endorsers"):
                raise ConfigError(
                    f"{where}: policy {values['policy']} does not match "
                    f"endorsers = {values['endorsers']}"
                )
        return replace(cls(), **updates).validate()


def parse_policy(text: str):
    """Parse "m/k" endorsement policy text into (m, k)."""
    parts = text.strip().split("/")
    if len(parts) != 2:
        raise ConfigError(f"policy must look like m/k, got {text!r}")
    try:
        m, k = int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"policy must look like m/k, got {text!r}")
    if not 1 <= m <= k:
        raise ConfigError(f"policy {text!r} needs 1 <= m <= k")
    return m, k


class Status(enum.Enum):
    COMMITTED = "committed"
    ABORTED = "aborted"
    REJECTED = "rejected"
    CANCELLED = "cancelled"


@dataclass(frozen=True)
class Receipt:
    tx_id: str
    client_id: str
    seq: int
    status: Status
    block_height: int = -1
    retry_count: int = 0
    reason: str = ""


@dataclass(frozen=True)
class _Pending:
    """A payload travelling toward an endorser."""

    client_id: str
    seq: int
    tx_id: str
    payload: TransactionPayload
    retry_count: int = 0


@dataclass
class RunStats:
    committed: int = 0
    aborted: int = 0
    rejected: int = 0
    cancelled: int = 0
    submitted: int = 0
    blocks: int = 0
    elapsed_s: float = 0.0
    overloaded: bool = False
    endorser_counts: Counter = field(default_factory=Counter)
    touch_total: int = 0
    touch_min: int = 0
    touch_max: int = 0
    receipts: list = field(default_factory=list)

    def finalized(self) -> int:
        return self.committed + self.aborted + self.rejected + self.cancelled

    def touches_mean(self) -> float:
        return self.touch_total / self.committed if self.committed else 0.0

    def tps(self) -> float:
        return self.committed / self.elapsed_s if self.elapsed_s > 0 else 0.0


class EndorsementRejected(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def simulate_payload(
    state: VersionedWorldState,
    payload: TransactionPayload,
    design: WorldStateDesign,
    roster,
):
    """One sandboxed execution; returns (rwset, access result or None)."""
    ctx = SimulationContext(state)
    result = execute_payload(ctx, payload, design, roster)
    return ctx.rwset(), result


def co_endorse(
    pending: _Pending,
    endorser_ids,
    state: VersionedWorldState,
    registry: MembershipRegistry,
    design: WorldStateDesign,
    roster,
    attempts: int = 5,
) -> EndorsedTransaction:
    """Authorize, then have every listed endorser simulate the payload.

    All simulations must agree on the read-write set and result; racing
    commits can briefly make them differ, so disagreement re-simulates.
    Raises EndorsementRejected for authorization failures.
    """
    payload = pending.payload
    try:
        registry.authorize(payload)
    except AuthorizationError as exc:
        raise EndorsementRejected(f"authorization: {exc.reason}")
    rwset, result = None, None
    for _ in range(max(1, attempts)):
        outcomes = [
            simulate_payload(state, payload, design, roster) for _ in endorser_ids
        ]
        rwset, result = outcomes[0]
        if all(o == outcomes[0] for o in outcomes[1:]):
            break
    stub = endorsement_stub(payload, rwset, endorser_ids)
    return EndorsedTransaction(
        tx_id=pending.tx_id,
        payload=payload,
        rwset=rwset,
        endorser_ids=tuple(endorser_ids),
        endorsement_stub=stub,
        result=result,
        client_id=pending.client_id,
        seq=pending.seq,
        retry_count=pending.retry_count,
    )


def make_state_init_tx(spec: PreloadSpec) -> EndorsedTransaction:
    """State-init commits by regenerating the preload; no endorsement needed."""
    return EndorsedTransaction(
        tx_id="init-000000",
        payload=state_init("w0", spec),
        rwset=ReadWriteSet(),
    )


def _endorser_ring(endorser_ids, start: int, m: int):
    return tuple(endorser_ids[(start + offset) % len(endorser_ids)] for offset in range(m))


class LedgerHarness:
    """Owns the state, the log, and threaded pipeline runs."""

    def __init__(
        self,
        design: WorldStateDesign,
        registry: MembershipRegistry,
        config: PipelineConfig | None = None,
        state: VersionedWorldState | None = None,
        log: BlockLog | None = None,
    ):
        self.design = design
        self.registry = registry
        self.config = (config or PipelineConfig()).validate()
        self.state = state if state is not None else VersionedWorldState()
        self.log = log if log is not None else BlockLog()
        self.roster = registry.roster()
        self.endorser_ids = tuple(f"e{i}" for i in range(self.config.endorsers))

    def bootstrap(self, preload: PreloadSpec | None = None, setup_payloads=()) -> int:
        """Commit preload and setup blocks before any timed run.

        Block 1 carries the state-init transaction when a preload is
        given; each setup payload (role grants, scripted consent) then
        commits in its own block through the normal endorsement path.
        Returns the number of blocks appended.
        """
        appended = 0
        if preload is not None:
            _, reasons = commit_block(
                self.state, self.log, (make_state_init_tx(preload),), self.config.policy_m
            )
            if reasons[0] != VALID:
                raise ConfigError(f"preload rejected: {reasons[0]}")
            appended += 1
        for i, payload in enumerate(setup_payloads):
            pending = _Pending("setup", i, f"setup-{i:06d}", payload)
            tx = co_endorse(
                pending,
                _endorser_ring(self.endorser_ids, i, self.config.policy_m),
                self.state,
                self.registry,
                self.design,
                self.roster,
            )
            _, reasons = commit_block(self.state, self.log, (tx,), self.config.policy_m)
            if reasons[0] != VALID:
                raise ConfigError(f"setup payload {i} failed: {reasons[0]}")
            appended += 1
        return appended

    def run(self, client_batches) -> RunStats:
        """Push every payload batch through the pipeline; returns run stats.

        client_batches: iterable of payload lists, one per client thread.
        """
        cfg = self.config
        batches = [list(batch) for batch in client_batches]
        total = sum(len(b) for b in batches)
        stats = RunStats(submitted=total)
        if total == 0:
            return stats

        submission_qs = [
            queue.Queue(maxsize=cfg.per_endorser_depth()) for _ in self.endorser_ids
        ]
        ordered_q = queue.Queue(maxsize=cfg.ordered_depth)
        block_q = queue.Queue(maxsize=cfg.block_queue_depth)
        receipt_q = queue.Queue()

        cancel = threading.Event()
        clients_done = threading.Event()
        completion = threading.Event()
        stop = threading.Event()
        faults: list = []

        def guarded(fn):
            def runner(*args):
                try:
                    fn(*args)
                except Exception as exc:  # fail loud in the main thread
                    faults.append(exc)
                    cancel.set()
                    stop.set()
                    completion.set()

            return runner

        route_lock = threading.Lock()
        route_counter = [0]

        def cancelled_receipt(client_id, seq, tx_id, retry_count=0) -> None:
            receipt_q.put(
                (
                    "final",
                    Receipt(
                        tx_id=tx_id,
                        client_id=client_id,
                        seq=seq,
                        status=Status.CANCELLED,
                        retry_count=retry_count,
                        reason="overload",
                    ),
                )
            )

        def route(pending: _Pending) -> bool:
            """Round-robin submit; returns False when cancelled instead."""
            with route_lock:
                slot = route_counter[0]
                route_counter[0] += 1
            target = submission_qs[slot % len(submission_qs)]
            while not cancel.is_set():
                try:
                    target.put(pending, timeout=0.05)
                    return True
                except queue.Full:
                    continue
            return False

        def client_main(client_index: int, payloads) -> None:
            client_id = f"client{client_index}"
            for seq, payload in enumerate(payloads):
                pending = _Pending(client_id, seq, f"{client_id}-{seq:06d}", payload)
                if not route(pending):
                    cancelled_receipt(client_id, seq, pending.tx_id)

        def ordered_put(item) -> None:
            while True:
                try:
                    ordered_q.put(item, timeout=0.05)
                    return
                except queue.Full:
                    if stop.is_set():
                        return

        endorse_counts = [Counter() for _ in self.endorser_ids]

        def endorse_and_forward(pending: _Pending, ring, counts: Counter) -> None:
            for endorser_id in ring:
                counts[endorser_id] += 1
            try:
                tx = co_endorse(
                    pending, ring, self.state, self.registry, self.design, self.roster
                )
            except (EndorsementRejected, ContractError, KeyCodecError) as exc:
                reason = (
                    exc.reason
                    if isinstance(exc, EndorsementRejected)
                    else f"contract: {exc}"
                )
                receipt_q.put(
                    (
                        "final",
                        Receipt(
                            tx_id=pending.tx_id,
                            client_id=pending.client_id,
                            seq=pending.seq,
                            status=Status.REJECTED,
                            retry_count=pending.retry_count,
                            reason=reason,
                        ),
                    )
                )
                ordered_put(("gap", pending.client_id, pending.seq))
                return
            ordered_put(("tx", tx))

        def endorser_main(index: int) -> None:
            my_q = submission_qs[index]
            counts = endorse_counts[index]
            while True:
                try:
                    pending = my_q.get(timeout=0.05)
                except queue.Empty:
                    if stop.is_set():
                        return
                    continue
                if cancel.is_set():
                    cancelled_receipt(
                        pending.client_id, pending.seq, pending.tx_id, pending.retry_count
                    )
                    continue
                ring = _endorser_ring(self.endorser_ids, index, cfg.policy_m)
                endorse_and_forward(pending, ring, counts)

        def orderer_main() -> None:
            expected: dict = {}
            held: dict = {}
            batch: list = []
            deadline = [None]
            flushed_on_cancel = False

            def rearm() -> None:
                if batch and deadline[0] is None:
                    deadline[0] = time.monotonic() + cfg.block_timeout_ms / 1000
                elif not batch:
                    deadline[0] = None

            def advance(client_id: str, seq: int, tx) -> None:
                if seq != expected.get(client_id, 0):
                    held[(client_id, seq)] = tx
                    return
                cursor = seq
                while True:
                    if tx is not None:
                        batch.append(tx)
                    cursor += 1
                    expected[client_id] = cursor
                    if (client_id, cursor) in held:
                        tx = held.pop((client_id, cursor))
                    else:
                        return

            def cut() -> None:
                chunk = tuple(batch[: cfg.block_size])
                del batch[: len(chunk)]
                deadline[0] = None
                if not chunk:
                    return
                while True:
                    try:
                        block_q.put(chunk, timeout=0.05)
                        return
                    except queue.Full:
                        if stop.is_set():
                            return

            while True:
                if cancel.is_set() and not flushed_on_cancel:
                    flushed_on_cancel = True
                    for tx in list(batch) + [t for t in held.values() if t is not None]:
                        cancelled_receipt(tx.client_id, tx.seq, tx.tx_id, tx.retry_count)
                    batch.clear()
                    held.clear()
                    deadline[0] = None
                try:
                    item = ordered_q.get(timeout=0.01)
                except queue.Empty:
                    if stop.is_set():
                        return
                    if deadline[0] is not None and time.monotonic() >= deadline[0]:
                        cut()
                        rearm()
                    continue
                if cancel.is_set():
                    if item[0] == "tx":
                        tx = item[1]
                        cancelled_receipt(tx.client_id, tx.seq, tx.tx_id, tx.retry_count)
                    continue
                if item[0] == "tx":
                    tx = item[1]
                    advance(tx.client_id, tx.seq, tx)
                else:
                    _, client_id, seq = item
                    advance(client_id, seq, None)
                while len(batch) >= cfg.block_size:
                    cut()
                rearm()

        committer_stats = {"blocks": 0, "touch_total": 0, "touch_min": None, "touch_max": 0}

        def committer_main() -> None:
            while True:
                try:
                    chunk = block_q.get(timeout=0.05)
                except queue.Empty:
                    if stop.is_set():
                        return
                    continue
                _, reasons = commit_block(self.state, self.log, chunk, cfg.policy_m)
                committer_stats["blocks"] += 1
                for tx, reason in zip(chunk, reasons):
                    if reason == VALID:
                        touches = tx.rwset.touch_count()
                        committer_stats["touch_total"] += touches
                        low = committer_stats["touch_min"]
                        if low is None or touches < low:
                            committer_stats["touch_min"] = touches
                        if touches > committer_stats["touch_max"]:
                            committer_stats["touch_max"] = touches
                        receipt_q.put(("commit", tx, self.log.height))
                    else:
                        receipt_q.put(("abort", tx, reason))

        retry_seq = [0]

        def collector_main() -> None:
            finalized = 0
            while finalized < total:
                try:
                    item = receipt_q.get(timeout=0.05)
                except queue.Empty:
                    if stop.is_set():
                        return
                    continue
                kind = item[0]
                if kind == "final":
                    receipt = item[1]
                    stats.receipts.append(receipt)
                    if receipt.status is Status.REJECTED:
                        stats.rejected += 1
                    elif receipt.status is Status.CANCELLED:
                        stats.cancelled += 1
                    else:
                        stats.aborted += 1
                    finalized += 1
                elif kind == "commit":
                    tx, height = item[1], item[2]
                    stats.receipts.append(
                        Receipt(
                            tx_id=tx.tx_id,
                            client_id=tx.client_id,
                            seq=tx.seq,
                            status=Status.COMMITTED,
                            block_height=height,
                            retry_count=tx.retry_count,
                        )
                    )
                    stats.committed += 1
                    finalized += 1
                else:
                    tx, reason = item[1], item[2]
                    final_abort = (
                        reason == REASON_ENDORSEMENT
                        or tx.retry_count >= cfg.max_retries
                    )
                    if final_abort or cancel.is_set():
                        if final_abort:
                            stats.receipts.append(
                                Receipt(
                                    tx_id=tx.tx_id,
                                    client_id=tx.client_id,
                                    seq=tx.seq,
                                    status=Status.ABORTED,
                                    retry_count=tx.retry_count,
                                    reason=reason,
                                )
                            )
                            stats.aborted += 1
                        else:
                            stats.receipts.append(
                                Receipt(
                                    tx_id=tx.tx_id,
                                    client_id=tx.client_id,
                                    seq=tx.seq,
                                    status=Status.CANCELLED,
                                    retry_count=tx.retry_count,
                                    reason="overload",
                                )
                            )
                            stats.cancelled += 1
                        finalized += 1
                        continue
                    retry_seq[0] += 1
                    pending = _Pending(
                        client_id="retry",
                        seq=retry_seq[0] - 1,
                        tx_id=tx.tx_id,
                        payload=tx.payload,
                        retry_count=tx.retry_count + 1,
                    )
                    if not route(pending):
                        stats.receipts.append(
                            Receipt(
                                tx_id=tx.tx_id,
                                client_id=tx.client_id,
                                seq=tx.seq,
                                status=Status.CANCELLED,
                                retry_count=tx.retry_count,
                                reason="overload",
                            )
                        )
                        stats.cancelled += 1
                        finalized += 1
            completion.set()

        def monitor_main(watched) -> None:
            # A queue counts as saturated at 95% capacity: producers wake
            # with some latency after each pop, so a strict full() check
            # would flicker and reset the window.
            saturated_since = None
            while not (clients_done.is_set() or cancel.is_set() or stop.is_set()):
                if all(q.qsize() >= max(1, int(q.maxsize * 0.95)) for q in watched):
                    now = time.monotonic()
                    if saturated_since is None:
                        saturated_since = now
                    elif now - saturated_since >= cfg.overload_window_s:
                        stats.overloaded = True
                        cancel.set()
                        return
                else:
                    saturated_since = None
                time.sleep(0.05)

        threads: list = []
        client_workers: list = []

        if cfg.pre_endorsed:
            endorsed: list = []
            for client_index, payloads in enumerate(batches):
                client_id = f"client{client_index}"
                for seq, payload in enumerate(payloads):
                    pending = _Pending(client_id, seq, f"{client_id}-{seq:06d}", payload)
                    ring = _endorser_ring(
                        self.endorser_ids, client_index + seq, cfg.policy_m
                    )
                    for endorser_id in ring:
                        endorse_counts[0][endorser_id] += 1
                    try:
                        endorsed.append(
                            co_endorse(
                                pending,
                                ring,
                                self.state,
                                self.registry,
                                self.design,
                                self.roster,
                            )
                        )
                    except (EndorsementRejected, ContractError, KeyCodecError) as exc:
                        reason = (
                            exc.reason
                            if isinstance(exc, EndorsementRejected)
                            else f"contract: {exc}"
                        )
                        receipt_q.put(
                            (
                                "final",
                                Receipt(
                                    tx_id=pending.tx_id,
                                    client_id=client_id,
                                    seq=pending.seq,
                                    status=Status.REJECTED,
                                    reason=reason,
                                ),
                            )
                        )

            def feeder_main() -> None:
                for tx in endorsed:
                    if cancel.is_set():
                        cancelled_receipt(tx.client_id, tx.seq, tx.tx_id, tx.retry_count)
                        continue
                    ordered_put(("tx", tx))
                clients_done.set()

            threads.append(threading.Thread(target=guarded(feeder_main), daemon=True))
            threads.append(
                threading.Thread(
                    target=guarded(monitor_main), args=([ordered_q],), daemon=True
                )
            )
        else:
            for client_index, payloads in enumerate(batches):
                t = threading.Thread(
                    target=guarded(client_main), args=(client_index, payloads), daemon=True
                )
                client_workers.append(t)
                threads.append(t)

            def watch_clients() -> None:
                for t in client_workers:
                    t.join()
                clients_done.set()

            threads.append(threading.Thread(target=watch_clients, daemon=True))
            threads.append(
                threading.Thread(
                    target=guarded(monitor_main), args=(submission_qs,), daemon=True
                )
            )

        for index in range(len(self.endorser_ids)):
            threads.append(
                threading.Thread(target=guarded(endorser_main), args=(index,), daemon=True)
            )
        threads.append(threading.Thread(target=guarded(orderer_main), daemon=True))
        threads.append(threading.Thread(target=guarded(committer_main), daemon=True))
        threads.append(threading.Thread(target=guarded(collector_main), daemon=True))

        started = time.monotonic()
        for t in threads:
            t.start()

        last_progress = time.monotonic()
        last_finalized = -1
        while not completion.wait(timeout=0.2):
            finalized_now = stats.finalized()
            if finalized_now != last_finalized:
                last_finalized = finalized_now
                last_progress = time.monotonic()
            elif time.monotonic() - last_progress > cfg.stall_timeout_s:
                cancel.set()
                stop.set()
                raise PipelineStallError(
                    f"no receipt progress for {cfg.stall_timeout_s}s "
                    f"({finalized_now}/{total} finalized)"
                )
        stats.elapsed_s = time.monotonic() - started
        stop.set()
        for t in threads:
            t.join(timeout=10.0)
        if faults:
            raise PipelineFault(f"worker thread failed: {faults[0]!r}") from faults[0]

        stats.blocks = committer_stats["blocks"]
        stats.touch_total = committer_stats["touch_total"]
        stats.touch_min = committer_stats["touch_min"] or 0
        stats.touch_max = committer_stats["touch_max"]
        for counts in endorse_counts:
            stats.endorser_counts.update(counts)
        return stats


class SyncLedger:
    """Single-threaded engine with identical commit semantics.

    Each round endorses every pending payload against the current state,
    cuts the endorsed transactions into blocks of block_size in
    submission order, and commits them serially; aborted transactions
    re-enter the next round until max_retries runs out. Deterministic by
    construction, which makes it the engine of choice for semantic tests
    and scripted audit scenarios.
    """

    def __init__(
        self,
        design: WorldStateDesign,
        registry: MembershipRegistry,
        config: PipelineConfig | None = None,
        state: VersionedWorldState | None = None,
        log: BlockLog | None = None,
    ):
        self.design = design
        self.registry = registry
        self.config = (config or PipelineConfig()).validate()
        self.state = state if state is not None else VersionedWorldState()
        self.log = log if log is not None else BlockLog()
        self.roster = registry.roster()
        self.endorser_ids = tuple(f"e{i}" for i in range(self.config.endorsers))
        self._submitted = 0

    def preload(self, spec: PreloadSpec) -> None:
        _, reasons = commit_block(
            self.state, self.log, (make_state_init_tx(spec),), self.config.policy_m
        )
        if reasons[0] != VALID:
            raise ConfigError(f"preload rejected: {reasons[0]}")

    def endorse(self, payload: TransactionPayload) -> EndorsedTransaction:
        """Endorse without committing; for inspecting read-write sets."""
        seq = self._submitted
        self._submitted += 1
        pending = _Pending("sync", seq, f"sync-{seq:06d}", payload)
        return co_endorse(
            pending,
            _endorser_ring(self.endorser_ids, seq, self.config.policy_m),
            self.state,
            self.registry,
            self.design,
            self.roster,
        )

    def submit_batch(self, payloads) -> list:
        """Run payloads to final receipts; returns receipts in payload order."""
        pending = []
        receipts: dict = {}
        for payload in payloads:
            seq = self._submitted
            self._submitted += 1
            pending.append(_Pending("sync", seq, f"sync-{seq:06d}", payload))
        order = [p.tx_id for p in pending]

        while pending:
            endorsed = []
            for item in pending:
                try:
                    tx = co_endorse(
                        item,
                        _endorser_ring(self.endorser_ids, item.seq, self.config.policy_m),
                        self.state,
                        self.registry,
                        self.design,
                        self.roster,
                    )
                except EndorsementRejected as exc:
                    receipts[item.tx_id] = Receipt(
                        tx_id=item.tx_id,
                        client_id=item.client_id,
                        seq=item.seq,
                        status=Status.REJECTED,
                        retry_count=item.retry_count,
                        reason=exc.reason,
                    )
                    continue
                except (ContractError, KeyCodecError) as exc:
                    receipts[item.tx_id] = Receipt(
                        tx_id=item.tx_id,
                        client_id=item.client_id,
                        seq=item.seq,
                        status=Status.REJECTED,
                        retry_count=item.retry_count,
                        reason=f"contract: {exc}",
                    )
                    continue
                endorsed.append((item, tx))
            pending = []
            for start in range(0, len(endorsed), self.config.block_size):
                chunk = endorsed[start : start + self.config.block_size]
                txs = tuple(tx for _, tx in chunk)
                _, reasons = commit_block(self.state, self.log, txs, self.config.policy_m)
                for (item, tx), reason in zip(chunk, reasons):
                    if reason == VALID:
                        receipts[item.tx_id] = Receipt(
                            tx_id=item.tx_id,
                            client_id=item.client_id,
                            seq=item.seq,
                            status=Status.COMMITTED,
                            block_height=self.log.height,
                            retry_count=item.retry_count,
                        )
                    elif (
                        reason == REASON_ENDORSEMENT
                        or item.retry_count >= self.config.max_retries
                    ):
                        receipts[item.tx_id] = Receipt(
                            tx_id=item.tx_id,
                            client_id=item.client_id,
                            seq=item.seq,
                            status=Status.ABORTED,
                            retry_count=item.retry_count,
                            reason=reason,
                        )
                    else:
                        pending.append(replace(item, retry_count=item.retry_count + 1))
        return [receipts[tx_id] for tx_id in order]

    def submit_one(self, payload) -> Receipt:
        return self.submit_batch([payload])[0]
