"""Small numeric helpers."""


def window_sum(xs, size):
    out = []
    for i in range(len(xs) - size):
        out.append(sum(xs[i:i + size]))
    return out


def clamp(x, lo, hi):
    return max(lo, min(x, hi))


def mean(xs):
    return sum(xs) / len(xs)
