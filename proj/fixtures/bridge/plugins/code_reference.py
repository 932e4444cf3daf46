#!/usr/bin/env python3
# Runs the candidate's f on the critic's input and compares with the reference.
import json
import sys


def reference(x):
    return (3 * x + 1) % 16


def main():
    req = json.loads(sys.stdin.read())
    prop = req["proposal"]
    payload = prop["payload"].strip()
    if prop["form"] == "CALL":
        if not (payload.startswith("f(") and payload.endswith(")")):
            print("INVALID unknown function")
            return
        payload = payload[2:-1]
    try:
        x = int(payload)
    except ValueError:
        print("INVALID input is not an integer")
        return
    if not 0 <= x < 32:
        print("INVALID input outside 0..31")
        return
    scope = {}
    exec(req["output"], scope)
    got = scope["f"](x)
    want = reference(x)
    print("PASS" if got == want else "FAIL f(%d)=%r, expected %d" % (x, got, want))


main()
