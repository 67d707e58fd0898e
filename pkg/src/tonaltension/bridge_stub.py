"""Reference predictor for the external-bridge protocol.

Run with ``python -m tonaltension.bridge_stub`` to serve a uniform
distribution, or pass ``--bundle model.json`` to serve a trained n-gram.
Requests arrive as JSON lines on stdin and replies leave on stdout, one line
each, in the format expected by
:class:`tonaltension.seqmodel.ExternalBridgeModel`.  Mostly useful for
wiring tests and as a template for real predictor processes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .seqmodel import (
    BRIDGE_PROTOCOL_VERSION,
    UniformModel,
    controls_from_json,
    load_bundle,
)
from .tokens import TokenizerConfig, Vocabulary

FLOOR_LOGPROB = -1e9  # stands in for "no mass left" while staying valid JSON


def reply_for(model, request: dict, top_k: int) -> dict:
    context = [int(t) for t in request.get("context", [])]
    controls = controls_from_json(request.get("controls"))
    logp = np.asarray(model.next_token_logprobs(context, controls), dtype=float)
    finite = np.flatnonzero(np.isfinite(logp))
    order = finite[np.lexsort((finite, -logp[finite]))][:top_k]
    topk = [[int(i), float(logp[i])] for i in order]
    covered = float(np.sum(np.exp(logp[order])))
    remaining_ids = logp.size - len(topk)
    remaining_mass = max(0.0, 1.0 - covered)
    if remaining_ids > 0 and remaining_mass > 1e-12:
        rest = math.log(remaining_mass / remaining_ids)
    else:
        rest = FLOOR_LOGPROB
    return {
        "v": BRIDGE_PROTOCOL_VERSION,
        "id": request.get("id"),
        "topk": topk,
        "rest_logprob": rest,
    }


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m tonaltension.bridge_stub",
        description="Serve next-token predictions over the JSON-lines bridge.",
    )
    parser.add_argument("--bundle", help="model bundle to serve (default: uniform)")
    parser.add_argument("--topk", type=int, default=64,
                        help="number of explicit entries per reply (default 64)")
    args = parser.parse_args(argv)

    if args.bundle:
        model = load_bundle(args.bundle).model
    else:
        model = UniformModel(Vocabulary(TokenizerConfig()))

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        sys.stdout.write(json.dumps(reply_for(model, request, args.topk),
                                    separators=(",", ":")) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
