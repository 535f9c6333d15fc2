"""Stand-in task executable for the local-process backend.

Sleeps for the requested duration, then writes a token file whose presence
marks the task's output. `--require` asserts an input token exists first, so
a stage-2 process genuinely depends on its item's stage-1 output. Stdlib-only
on purpose: the interpreter must start fast and identically every time, since
spawn cost is measured and fed back into the simulator.
"""

import argparse
import os
import sys
import time


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stagesim-mock-task")
    parser.add_argument("--sleep-s", type=float, required=True, help="compute time to emulate")
    parser.add_argument("--out", required=True, help="token file to write on success")
    parser.add_argument("--require", default=None, help="input token that must already exist")
    args = parser.parse_args(argv)

    if args.require is not None and not os.path.exists(args.require):
        print(f"missing required input token: {args.require}", file=sys.stderr)
        return 2
    if args.sleep_s > 0:
        time.sleep(args.sleep_s)
    with open(args.out, "w") as fh:
        fh.write(f"{os.getpid()} {time.time():.6f}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
