"""Command line entry: serve models over stdin/stdout frames."""

from __future__ import annotations

import argparse
import sys

from .server import serve


def _ids(text: str) -> tuple[int, ...]:
    parts = text.replace(",", " ").split()
    if not parts:
        raise argparse.ArgumentTypeError("expected at least one token id")
    try:
        ids = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"token ids must be integers, got {text!r}") from None
    if any(i < 0 for i in ids):
        raise argparse.ArgumentTypeError(f"token ids must be nonnegative, got {text!r}")
    return ids


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="swibridge-serve",
        description="Serve a model one step at a time over stdin/stdout "
        "frames (protocol swibridge/1). The client names the model in its "
        "Init; 'toy[:vocab[:dim[:seed]]]' builds a seeded toy model, anything "
        "else loads a causal LM from a path or hub id.",
    )
    parser.add_argument(
        "--think-begin", type=_ids, default=(1,), metavar="IDS",
        help="think-begin marker ids reported to the client (default: 1)",
    )
    parser.add_argument(
        "--think-end", type=_ids, default=(2,), metavar="IDS",
        help="think-end marker ids reported to the client (default: 2)",
    )
    parser.add_argument(
        "--eos", type=int, default=None, metavar="ID",
        help="end-of-sequence id override, for models that declare none",
    )
    parser.add_argument(
        "--echo", action="store_true",
        help="reflect every frame back unparsed (wire testing only)",
    )
    args = parser.parse_args(argv)
    try:
        serve(
            sys.stdin.buffer,
            sys.stdout.buffer,
            think_begin=args.think_begin,
            think_end=args.think_end,
            eos_override=args.eos,
            echo=args.echo,
        )
    except BrokenPipeError:
        pass  # the client hung up; nothing useful left to do
    return 0


if __name__ == "__main__":
    sys.exit(main())
