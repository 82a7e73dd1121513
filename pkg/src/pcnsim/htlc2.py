"""Two-preimage conditional payments with non-refundable fee delivery.

The main multi-hop payment is locked hop by hop, but each hop's contract
needs two preimages: the receiver's payment secret and a per-hop gate token
chosen by the source.  Every forwarding node's gate token travels inside an
onion payload readable only by that node's successor.  Alongside the main
payment, the source routes one small fee payment per forwarding node
(carrying that node's non-refundable fee share), hash-locked on the same
gate token.

Choreography per hop (u, v): once the main contract is locked, v extracts
u's gate token from its payload and hands it back; u uses it to claim its
own fee payment, then locks the remaining downstream fee payments in the
channel as confirmation, after which v may forward.  A wrong token is
detected at this handshake and both parties cancel every contract of the
payment in their channel.  Two rules bound misbehavior: a channel allows at
most one main payment with an outstanding handshake at a time, and a
successor that stalls the handshake gets its channel closed.  Together they
cap any node's loss at one non-refundable fee per channel lifetime.

Hashing is simulated: a preimage is an opaque token and its lock is an
injective tag of it.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .pathfinding import PathPlan, round_half_up

__all__ = [
    "hashlock",
    "verify",
    "ContractKind",
    "ContractStatus",
    "Htlc2Contract",
    "OnionPayload",
    "FeePlan",
    "PaymentSetup",
    "setup_payment",
    "ChannelLedger",
    "ProtocolError",
    "ScriptKind",
    "AdversaryScript",
    "PaymentReport",
    "Htlc2Engine",
    "adversary_run",
    "trace_jsonl",
]


class ProtocolError(Exception):
    pass


def hashlock(preimage: str) -> str:
    """Injective stand-in for a hash commitment to ``preimage``."""
    return f"lock[{preimage}]"


def verify(lock: str, preimage: str) -> bool:
    return lock == hashlock(preimage)


class ContractKind(Enum):
    MAIN = "main"
    FEE = "fee"


class ContractStatus(Enum):
    PENDING = "pending"
    CLAIMED = "claimed"
    CANCELLED = "cancelled"


@dataclass
class Htlc2Contract:
    """A conditional payment inside one channel.

    Main contracts carry two locks (payment secret plus gate token) except
    on a direct single-hop payment, which needs no gate.  Fee contracts
    carry one lock and name the forwarding node they ultimately pay.
    """

    contract_id: str
    kind: ContractKind
    amount: int
    locks: tuple[str, ...]
    beneficiary: Optional[int] = None
    status: ContractStatus = ContractStatus.PENDING

    def __post_init__(self) -> None:
        expected = 1 if self.kind is ContractKind.FEE else len(self.locks)
        if self.kind is ContractKind.FEE and len(self.locks) != expected:
            raise ProtocolError("fee contracts take exactly one lock")
        if self.kind is ContractKind.MAIN and len(self.locks) not in (1, 2):
            raise ProtocolError("main contracts take one or two locks")

    def claimable_with(self, preimages: Sequence[str]) -> bool:
        return all(any(verify(lock, p) for p in preimages) for lock in self.locks)


@dataclass
class OnionPayload:
    """Per-hop envelopes: each node can open exactly its own entry."""

    _entries: dict[str, str]

    def reveal(self, node: str) -> str:
        if node not in self._entries:
            raise ProtocolError(f"no payload entry for {node}")
        return self._entries[node]

    def has_entry(self, node: str) -> bool:
        return node in self._entries


@dataclass(frozen=True)
class FeePlan:
    """Fee payment for one forwarding node: its value and gate lock."""

    beneficiary: int
    value: int
    lock: str


@dataclass
class PaymentSetup:
    """Everything the source prepares before the first lock."""

    nodes: tuple[str, ...]
    amount: int
    main_amounts: tuple[int, ...]
    fee_plans: tuple[FeePlan, ...]
    payload: OnionPayload
    payment_lock: str
    payment_preimage: str
    gate_tokens: tuple[str, ...]

    @property
    def num_hops(self) -> int:
        return len(self.nodes) - 1


def setup_payment(
    path: PathPlan, fractions: Sequence[float], seed: int
) -> PaymentSetup:
    """Prepare contracts for a payment over ``path``.

    ``fractions`` gives the non-refundable share per forwarding node (one
    entry per hop after the first).  The fee payment for node i carries
    round(x_i * fee_i); the main-contract amounts shrink accordingly so a
    forwarding node's total intake on success is exactly its fee.  A direct
    payment needs no fee plans and a single-lock contract.
    """
    nodes = tuple(path.nodes)
    num_hops = len(nodes) - 1
    if num_hops < 1:
        raise ValueError("path needs at least one hop")
    if len(fractions) != max(0, num_hops - 1):
        raise ValueError("one fraction per forwarding node expected")

    rng = random.Random(f"htlc2:{seed}")

    def token(label: str) -> str:
        return f"{label}:{rng.getrandbits(64):016x}"

    payment_preimage = token("r")
    gate_tokens = tuple(token(f"g{i}") for i in range(num_hops))

    fee_values = [0] * num_hops  # index by forwarding node, 0 unused
    fee_plans: list[FeePlan] = []
    for i in range(1, num_hops):
        fee_values[i] = round_half_up(fractions[i - 1] * path.hops[i].fee)
        fee_plans.append(
            FeePlan(
                beneficiary=i,
                value=fee_values[i],
                lock=hashlock(gate_tokens[i]),
            )
        )

    main_amounts = [0] * num_hops
    main_amounts[num_hops - 1] = path.amount
    for i in range(num_hops - 2, -1, -1):
        margin = path.hops[i + 1].fee - fee_values[i + 1]
        main_amounts[i] = main_amounts[i + 1] + margin

    payload = OnionPayload(
        {nodes[i + 1]: gate_tokens[i] for i in range(num_hops)}
    )
    return PaymentSetup(
        nodes=nodes,
        amount=path.amount,
        main_amounts=tuple(main_amounts),
        fee_plans=tuple(fee_plans),
        payload=payload,
        payment_lock=hashlock(payment_preimage),
        payment_preimage=payment_preimage,
        gate_tokens=gate_tokens,
    )


@dataclass
class ChannelLedger:
    """Contract book for one directed channel, enforcing the two rules.

    At most one main contract may await its fee-preimage handshake at any
    time; offering a second is rejected.  Closing the channel permanently
    refuses new contracts.
    """

    from_node: str
    to_node: str
    open: bool = True
    contracts: dict[str, Htlc2Contract] = field(default_factory=dict)
    unconfirmed_main: Optional[str] = None
    losses: int = 0

    @property
    def key(self) -> str:
        return f"{self.from_node}->{self.to_node}"

    @property
    def count_unconfirmed_fee(self) -> int:
        return 0 if self.unconfirmed_main is None else 1

    def offer_main(self, contract: Htlc2Contract) -> Optional[str]:
        """Add a main contract; returns a rejection reason or None."""
        if not self.open:
            return "channel_closed"
        if self.unconfirmed_main is not None:
            return "unconfirmed_payment_pending"
        self.contracts[contract.contract_id] = contract
        self.unconfirmed_main = contract.contract_id
        return None

    def confirm_main(self, contract_id: str) -> None:
        if self.unconfirmed_main != contract_id:
            raise ProtocolError(f"{contract_id} is not awaiting confirmation")
        self.unconfirmed_main = None

    def offer_fee(self, contract: Htlc2Contract) -> Optional[str]:
        if not self.open:
            return "channel_closed"
        self.contracts[contract.contract_id] = contract
        return None

    def claim(self, contract_id: str, preimages: Sequence[str]) -> int:
        contract = self.contracts[contract_id]
        if contract.status is not ContractStatus.PENDING:
            raise ProtocolError(f"{contract_id} already {contract.status.value}")
        if not contract.claimable_with(preimages):
            raise ProtocolError(f"{contract_id}: preimages do not match locks")
        contract.status = ContractStatus.CLAIMED
        return contract.amount

    def cancel_pending(self) -> list[str]:
        cancelled = []
        for contract in self.contracts.values():
            if contract.status is ContractStatus.PENDING:
                contract.status = ContractStatus.CANCELLED
                cancelled.append(contract.contract_id)
        self.unconfirmed_main = None
        return cancelled

    def close(self) -> None:
        self.open = False


class ScriptKind(Enum):
    HONEST = "honest"
    BRIBED_SUCCESSOR = "bribed_successor"
    SOURCE_WRONG_PREIMAGE = "source_wrong_preimage"


@dataclass(frozen=True)
class AdversaryScript:
    """Misbehavior to inject: the bribed successor withholds the gate token
    it owes its predecessor; the cheating source plants a garbage token in
    one node's payload entry."""

    kind: ScriptKind = ScriptKind.HONEST
    node_index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind is not ScriptKind.HONEST and self.node_index is None:
            raise ValueError(f"{self.kind.value} needs a node index")


@dataclass
class PaymentReport:
    """Outcome of one payment run: value movements and rule enforcement."""

    succeeded: bool
    aborted_at_hop: Optional[int]
    transfers: dict[str, int]
    nonrefundable: dict[str, int]
    entitled: dict[str, int]
    losses: dict[str, int]
    closures: list[str]
    rejected_reason: Optional[str] = None


class Htlc2Engine:
    """Message-driven protocol executor over persistent channel ledgers.

    Channels survive across payments, so closures from one payment block
    later ones.  One message is processed at a time; when the queue drains
    with a handshake still open, the waiting predecessor's patience is
    considered exhausted and it closes the channel.
    """

    def __init__(self, response_deadline: float = 8.0) -> None:
        self.response_deadline = response_deadline
        self.ledgers: dict[tuple[str, str], ChannelLedger] = {}
        self.events: list[dict] = []
        self.time = 0.0
        self._contract_seq = 0

    # -- infrastructure -----------------------------------------------------

    def ledger(self, from_node: str, to_node: str) -> ChannelLedger:
        key = (from_node, to_node)
        if key not in self.ledgers:
            self.ledgers[key] = ChannelLedger(from_node, to_node)
        return self.ledgers[key]

    def _emit(
        self,
        event: str,
        channel: Optional[ChannelLedger] = None,
        contract: Optional[str] = None,
        party: Optional[str] = None,
    ) -> None:
        self.events.append(
            {
                "event": event,
                "channel": None if channel is None else channel.key,
                "contract": contract,
                "party": party,
                "time": self.time,
            }
        )

    def _new_id(self, kind: str) -> str:
        self._contract_seq += 1
        return f"{kind}-{self._contract_seq}"

    # -- one payment ---------------------------------------------------------

    def run_payment(
        self,
        setup: PaymentSetup,
        script: AdversaryScript = AdversaryScript(),
        refuse_forward_at: Optional[int] = None,
    ) -> PaymentReport:
        nodes = setup.nodes
        n = setup.num_hops
        payload = setup.payload
        if script.kind is ScriptKind.SOURCE_WRONG_PREIMAGE:
            entries = dict(payload._entries)
            entries[nodes[script.node_index]] = "garbage-token"
            payload = OnionPayload(entries)

        transfers: dict[str, int] = {node: 0 for node in nodes}
        nonref: dict[str, int] = {node: 0 for node in nodes}
        fee_received: dict[str, int] = {node: 0 for node in nodes}
        entitled: dict[str, int] = {node: 0 for node in nodes}
        closures: list[str] = []
        main_ids: dict[int, str] = {}
        fee_ids: dict[tuple[int, int], str] = {}  # (channel hop, beneficiary)
        fee_value = {p.beneficiary: p.value for p in setup.fee_plans}
        fee_lock = {p.beneficiary: p.lock for p in setup.fee_plans}
        handshake_open: dict[int, bool] = {}
        succeeded = False
        aborted_at: Optional[int] = None
        rejected_reason: Optional[str] = None

        def abort_from(hop: int, closure_hop: Optional[int] = None) -> None:
            """Cancel every pending contract of this payment at hops <= hop."""
            nonlocal aborted_at
            aborted_at = hop if aborted_at is None else min(aborted_at, hop)
            for j in range(hop, -1, -1):
                led = self.ledger(nodes[j], nodes[j + 1])
                for cid in led.cancel_pending():
                    self._emit("contract_cancelled", led, cid)
                if closure_hop == j:
                    led.close()
                    led.losses += 1
                    closures.append(led.key)
                    self._emit("channel_closed", led, party=nodes[j])

        queue: deque[tuple] = deque([("lock_main", 0)])

        while queue:
            self.time += 1.0
            message = queue.popleft()
            kind = message[0]

            if kind == "lock_main":
                (_, i) = message
                led = self.ledger(nodes[i], nodes[i + 1])
                locks = (
                    (setup.payment_lock,)
                    if n == 1
                    else (setup.payment_lock, hashlock(setup.gate_tokens[i]))
                )
                contract = Htlc2Contract(
                    self._new_id("main"), ContractKind.MAIN,
                    setup.main_amounts[i], locks,
                )
                reason = led.offer_main(contract)
                if reason is not None:
                    rejected_reason = reason
                    self._emit(f"main_rejected_{reason}", led, party=nodes[i])
                    if i > 0:
                        abort_from(i - 1)
                    break
                main_ids[i] = contract.contract_id
                handshake_open[i] = True
                self._emit("main_locked", led, contract.contract_id, nodes[i])
                if n == 1:
                    queue.append(("receiver_claim",))
                else:
                    queue.append(("gate", i))

            elif kind == "gate":
                (_, i) = message
                successor = nodes[i + 1]
                if (
                    script.kind is ScriptKind.BRIBED_SUCCESSOR
                    and script.node_index == i + 1
                ):
                    self._emit("gate_token_withheld", party=successor)
                    continue  # stall; drain handling closes the channel
                token = payload.reveal(successor)
                self._emit("gate_token_sent", party=successor)
                queue.append(("confirm", i, token))

            elif kind == "confirm":
                (_, i, token) = message
                predecessor = nodes[i]
                led = self.ledger(nodes[i], nodes[i + 1])
                ok = verify(hashlock(setup.gate_tokens[i]), token)
                if i > 0 and ok:
                    # Claim own fee payment, then cascade the token upstream
                    # through the in-transit copies.
                    for j in range(i - 1, -1, -1):
                        cid = fee_ids.get((j, i))
                        if cid is None:
                            break
                        upstream = self.ledger(nodes[j], nodes[j + 1])
                        value = upstream.claim(cid, [token])
                        transfers[nodes[j + 1]] += value
                        transfers[nodes[j]] -= value
                        nonref[nodes[j + 1]] += value
                        nonref[nodes[j]] -= value
                        if j + 1 == i:
                            fee_received[nodes[i]] += value
                        self._emit("fee_claimed", upstream, cid, nodes[j + 1])
                if not ok:
                    self._emit("wrong_preimage_abort", led, party=predecessor)
                    handshake_open[i] = False
                    abort_from(i)
                    break
                handshake_open[i] = False
                led.confirm_main(main_ids[i])
                if i >= 1:
                    entitled[predecessor] += fee_value.get(i, 0)
                self._emit("main_confirmed", led, main_ids[i], predecessor)
                for b in range(i + 1, n):
                    contract = Htlc2Contract(
                        self._new_id("fee"), ContractKind.FEE,
                        fee_value[b], (fee_lock[b],), beneficiary=b,
                    )
                    reason = led.offer_fee(contract)
                    if reason is None:
                        fee_ids[(i, b)] = contract.contract_id
                        self._emit("fee_locked", led, contract.contract_id, predecessor)
                queue.append(("advance", i))

            elif kind == "advance":
                (_, i) = message
                nxt = i + 1
                if nxt == n:
                    queue.append(("receiver_claim",))
                elif refuse_forward_at == nxt:
                    self._emit("forward_refused", party=nodes[nxt])
                    abort_from(i)
                    break
                else:
                    queue.append(("lock_main", nxt))

            elif kind == "receiver_claim":
                receiver = nodes[n]
                led = self.ledger(nodes[n - 1], nodes[n])
                preimages = [setup.payment_preimage]
                if n > 1:
                    preimages.append(payload.reveal(receiver))
                try:
                    value = led.claim(main_ids[n - 1], preimages)
                except ProtocolError:
                    self._emit("wrong_preimage_abort", led, party=receiver)
                    abort_from(n - 1)
                    break
                transfers[receiver] += value
                transfers[nodes[n - 1]] -= value
                self._emit("main_claimed", led, main_ids[n - 1], receiver)
                for i in range(n - 2, -1, -1):
                    led = self.ledger(nodes[i], nodes[i + 1])
                    claimant = nodes[i + 1]
                    value = led.claim(
                        main_ids[i],
                        [setup.payment_preimage, payload.reveal(claimant)],
                    )
                    transfers[claimant] += value
                    transfers[nodes[i]] -= value
                    self._emit("main_claimed", led, main_ids[i], claimant)
                succeeded = True

        # Drain: an open handshake means the successor withheld the token
        # past the predecessor's patience; the predecessor closes the channel
        # (it already bears the stranded lock, hence it is the one fee down).
        for i, still_open in handshake_open.items():
            if still_open and not succeeded:
                if i >= 1:
                    entitled[nodes[i]] += fee_value.get(i, 0)
                self.time += self.response_deadline
                self._emit(
                    "handshake_deadline_expired",
                    self.ledger(nodes[i], nodes[i + 1]),
                    party=nodes[i],
                )
                abort_from(i, closure_hop=i)

        losses = {
            node: max(0, entitled[node] - fee_received[node]) for node in nodes
        }
        return PaymentReport(
            succeeded=succeeded,
            aborted_at_hop=aborted_at,
            transfers=transfers,
            nonrefundable=nonref,
            entitled=entitled,
            losses=losses,
            closures=closures,
            rejected_reason=rejected_reason,
        )


def adversary_run(
    path: PathPlan,
    fractions: Sequence[float],
    script: AdversaryScript,
    seed: int = 0,
    refuse_forward_at: Optional[int] = None,
    engine: Optional[Htlc2Engine] = None,
) -> tuple[PaymentReport, Htlc2Engine]:
    """Replay one payment under a misbehavior script.

    Pass an existing engine to reuse channel state (closures persist)."""
    if engine is None:
        engine = Htlc2Engine()
    setup = setup_payment(path, fractions, seed)
    report = engine.run_payment(setup, script, refuse_forward_at)
    return report, engine


def trace_jsonl(events: Iterable[dict]) -> Iterable[str]:
    for event in events:
        yield json.dumps(event, sort_keys=True)
