#!/usr/bin/env python3
"""The two-preimage conditional-payment protocol, honest and attacked.

Non-refundable fee shares need a delivery mechanism that misbehaving
parties cannot milk.  Each forwarding node's share travels as its own small
hash-locked payment whose preimage is handed over, hop by hop, as the main
payment advances; the main contracts themselves need both the receiver's
secret and the per-hop gate token.  Two channel rules bound the damage any
cheat can do: one unconfirmed handshake at a time, and a stalled handshake
closes the channel.
"""

from pcnsim.cli import _linear_path_plan
from pcnsim.htlc2 import (
    AdversaryScript,
    Htlc2Engine,
    ScriptKind,
    setup_payment,
)

path = _linear_path_plan(4, 25_000)
fractions = [0.4, 0.4]
fees = [h.fee for h in path.hops]
print(f"path {' -> '.join(path.nodes)}, amount {path.amount:,}, "
      f"forwarding fees {fees[1:]}\n")


def run(label, script=AdversaryScript(), refuse_at=None, engine=None):
    engine = engine or Htlc2Engine()
    setup = setup_payment(path, fractions, seed=13)
    report = engine.run_payment(setup, script, refuse_forward_at=refuse_at)
    print(f"--- {label}")
    print(f"    outcome: {'success' if report.succeeded else 'failure'}"
          + (f" (aborted at hop {report.aborted_at_hop})"
             if report.aborted_at_hop is not None else ""))
    print(f"    net transfers: {report.transfers}")
    print(f"    non-refundable flow: {report.nonrefundable}")
    if any(report.losses.values()):
        print(f"    losses: {report.losses}")
    if report.closures:
        print(f"    closed channels: {report.closures}")
    if report.rejected_reason:
        print(f"    rejected: {report.rejected_reason}")
    print()
    return engine


run("honest run: each forwarder nets exactly its fee")

run("second forwarder cannot forward: lockers keep their shares",
    refuse_at=2)

engine = run("bribed successor withholds the gate token: one share lost, "
             "channel closed",
             AdversaryScript(ScriptKind.BRIBED_SUCCESSOR, 2))

run("the same attack again on the surviving state: nothing left to steal",
    AdversaryScript(ScriptKind.BRIBED_SUCCESSOR, 2), engine=engine)

run("source plants a garbage token: payment dies at the handshake, no one "
    "is cheated",
    AdversaryScript(ScriptKind.SOURCE_WRONG_PREIMAGE, 2))

print("--- honest event trace (first 12 events)")
engine = Htlc2Engine()
engine.run_payment(setup_payment(path, fractions, seed=13))
for event in engine.events[:12]:
    channel = event["channel"] or "-"
    print(f"    t={event['time']:>4} {event['event']:24s} "
          f"party={event['party'] or '-':4s} channel={channel}")
