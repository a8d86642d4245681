"""Deliberately simple reference cache, used only to check the simulator.

No compression, no clever data structures: every access is looked up in a
per-set dict of line -> last-use time and the oldest line is evicted.
"""


def naive_misses(addresses, size_bytes, associativity, line_bytes):
    num_sets = size_bytes // (associativity * line_bytes)
    sets = [dict() for _ in range(num_sets)]
    misses = 0
    for t, addr in enumerate(addresses):
        line = addr // line_bytes
        s = sets[line % num_sets]
        if line not in s:
            misses += 1
            if len(s) == associativity:
                oldest = min(s, key=s.get)
                del s[oldest]
        s[line] = t
    return misses
