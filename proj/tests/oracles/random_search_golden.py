#!/usr/bin/env python3
"""Offline oracle for the random-search golden values.

Re-implements, independently of the C++ code, the suggestion stream used by
random search: std::seed_seq over (seed_lo, seed_hi, index_lo, index_hi),
std::mt19937_64 seeded from it, and the 53-bit uniform conversion. Runs
random search on f(x) = -(x - 0.3)^2, x in [0, 1], and prints the best
observation. The printed numbers are frozen into the C++ tests.

Usage: random_search_golden.py [seed] [budget]
"""
import sys

M32 = 0xFFFFFFFF
M64 = 0xFFFFFFFFFFFFFFFF


def seed_seq_generate(v, n):
    b = [0x8B8B8B8B] * n
    s = len(v)
    if n >= 623:
        t = 11
    elif n >= 68:
        t = 7
    elif n >= 39:
        t = 5
    elif n >= 7:
        t = 3
    else:
        t = (n - 1) // 2
    p = (n - t) // 2
    q = p + t
    m = max(s + 1, n)

    def T(x):
        return x ^ (x >> 27)

    for k in range(m):
        r1 = (1664525 * T(b[k % n] ^ b[(k + p) % n] ^ b[(k - 1) % n])) & M32
        if k == 0:
            r2 = (r1 + s) & M32
        elif k <= s:
            r2 = (r1 + k % n + v[k - 1]) & M32
        else:
            r2 = (r1 + k % n) & M32
        b[(k + p) % n] = (b[(k + p) % n] + r1) & M32
        b[(k + q) % n] = (b[(k + q) % n] + r2) & M32
        b[k % n] = r2
    for k in range(m, m + n):
        r3 = (1566083941 * T((b[k % n] + b[(k + p) % n] + b[(k - 1) % n]) & M32)) & M32
        r4 = (r3 - k % n) & M32
        b[(k + p) % n] ^= r3
        b[(k + q) % n] ^= r4
        b[k % n] = r4
    return b


class MT19937_64:
    N, M = 312, 156
    MATRIX_A = 0xB5026F5AA96619E9
    UPPER = 0xFFFFFFFF80000000
    LOWER = 0x7FFFFFFF

    def __init__(self, words32):
        a = seed_seq_generate(words32, 2 * self.N)
        self.mt = [(a[2 * i] | (a[2 * i + 1] << 32)) & M64 for i in range(self.N)]
        if (self.mt[0] & self.UPPER) == 0 and all(x == 0 for x in self.mt[1:]):
            self.mt[0] = 1 << 63
        self.idx = self.N

    def _twist(self):
        mt = self.mt
        for i in range(self.N):
            y = (mt[i] & self.UPPER) | (mt[(i + 1) % self.N] & self.LOWER)
            v = mt[(i + self.M) % self.N] ^ (y >> 1)
            if y & 1:
                v ^= self.MATRIX_A
            mt[i] = v
        self.idx = 0

    def next(self):
        if self.idx >= self.N:
            self._twist()
        y = self.mt[self.idx]
        self.idx += 1
        y ^= (y >> 29) & 0x5555555555555555
        y ^= (y << 17) & 0x71D67FFFEDA60000
        y ^= (y << 37) & 0xFFF7EEE000000000
        y ^= y >> 43
        return y & M64


def stream(seed, index):
    return MT19937_64([seed & M32, (seed >> 32) & M32, index & M32, (index >> 32) & M32])


def uniform(rng):
    return (rng.next() >> 11) * 2.0 ** -53


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 42
    budget = int(sys.argv[2]) if len(sys.argv) > 2 else 100
    best = None
    for i in range(budget):
        x = min(max(uniform(stream(seed, i)), 0.0), 1.0)
        f = -(x - 0.3) ** 2
        if best is None or f > best[1]:
            best = (i, f, x)
    first = [min(max(uniform(stream(seed, i)), 0.0), 1.0) for i in range(3)]
    print(f"seed={seed} budget={budget}")
    print(f"first_three={[repr(v) for v in first]}")
    print(f"best_index={best[0]} best_x={best[2]!r} best_value={best[1]!r}")


if __name__ == "__main__":
    main()
