#!/usr/bin/env python3
# A sentence is wrong when it mentions a phrase from the false list.
import json
import sys

FALSE = ["New York", "in 1950", "a chemist"]

req = json.loads(sys.stdin.read())
text = req["proposal"].get("sentence_text", "")
if not text:
    print("INVALID no such sentence")
elif any(f in text for f in FALSE):
    print("FAIL " + text)
else:
    print("PASS")
