"""MatrixMarket reading and writing.

The reader accepts the ``matrix`` object in ``coordinate`` or ``array``
layout with ``real``, ``integer`` or ``complex`` fields and ``general``,
``symmetric``, ``hermitian`` or ``skew-symmetric`` symmetry.  Errors carry the
1-based line and column of the offending token.  The writer prints 17
significant digits, so a write followed by a read is bit-exact.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

FIELDS = ("real", "integer", "complex")
SYMMETRIES = ("general", "symmetric", "hermitian", "skew-symmetric")


class ParseError(InvalidInputError):
    def __init__(self, path, line, col, msg):
        self.path, self.line, self.col = path, line, col
        super().__init__(f"{path}:{line}:{col}: {msg}")


def _tokens(text):
    """(token, column) pairs of a line, columns 1-based."""
    out = []
    i = 0
    n = len(text)
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        j = i
        while j < n and not text[j].isspace():
            j += 1
        out.append((text[i:j], i + 1))
        i = j
    return out


def _number(path, lineno, tok, kind):
    s, col = tok
    try:
        return int(s) if kind == "int" else float(s)
    except ValueError:
        want = "an integer" if kind == "int" else "a number"
        raise ParseError(path, lineno, col, f"expected {want}, got {s!r}") from None


def read(path):
    """Dense ndarray (float64 or complex128) from a MatrixMarket file."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(path, 1, 1, "empty file")
    head = _tokens(lines[0])
    if len(head) != 5 or head[0][0] != "%%MatrixMarket":
        raise ParseError(path, 1, 1, "header must be '%%MatrixMarket matrix <layout> <field> <symmetry>'")
    words = [t[0].lower() for t in head]
    checks = (
        (1, ("matrix",), "object"),
        (2, ("coordinate", "array"), "layout"),
        (3, FIELDS, "field"),
        (4, SYMMETRIES, "symmetry"),
    )
    for idx, allowed, what in checks:
        if words[idx] not in allowed:
            raise ParseError(path, 1, head[idx][1], f"unsupported {what} {head[idx][0]!r}")
    layout, field, sym = words[2], words[3], words[4]
    if sym == "hermitian" and field != "complex":
        raise ParseError(path, 1, head[4][1], "hermitian symmetry needs a complex field")

    body = [(i + 1, _tokens(s)) for i, s in enumerate(lines[1:], start=1)]
    body = [(ln, toks) for ln, toks in body if toks and not toks[0][0].startswith("%")]
    if not body:
        raise ParseError(path, len(lines), 1, "missing size line")
    ln, size = body[0]
    entries = body[1:]
    per = 2 if field == "complex" else 1
    dtype = np.complex128 if field == "complex" else np.float64

    if layout == "coordinate":
        if len(size) != 3:
            raise ParseError(path, ln, 1, "coordinate size line needs 'rows cols nnz'")
        m, n, nnz = (_number(path, ln, t, "int") for t in size)
    else:
        if len(size) != 2:
            raise ParseError(path, ln, 1, "array size line needs 'rows cols'")
        m, n = (_number(path, ln, t, "int") for t in size)
    if m <= 0 or n <= 0:
        raise ParseError(path, ln, 1, "matrix dimensions must be positive")
    if sym != "general" and m != n:
        raise ParseError(path, ln, 1, f"{sym} matrix must be square")
    a = np.zeros((m, n), dtype=dtype)

    def value(lineno, toks):
        if per == 2:
            return complex(_number(path, lineno, toks[0], "f"), _number(path, lineno, toks[1], "f"))
        return _number(path, lineno, toks[0], "f")

    def place(i, j, v, lineno, col):
        if sym != "general" and i < j:
            raise ParseError(path, lineno, col, f"{sym} storage lists the lower triangle only")
        if i == j and sym == "skew-symmetric" and v != 0:
            raise ParseError(path, lineno, col, "skew-symmetric diagonal must be zero")
        a[i, j] = v
        if i != j:
            if sym == "symmetric":
                a[j, i] = v
            elif sym == "hermitian":
                a[j, i] = np.conj(v)
            elif sym == "skew-symmetric":
                a[j, i] = -v

    if layout == "coordinate":
        if len(entries) != nnz:
            where = entries[-1][0] + 1 if entries else ln + 1
            raise ParseError(path, where, 1, f"expected {nnz} entries, found {len(entries)}")
        for lineno, toks in entries:
            if len(toks) != 2 + per:
                raise ParseError(path, lineno, 1, f"expected {2 + per} fields, found {len(toks)}")
            i = _number(path, lineno, toks[0], "int")
            j = _number(path, lineno, toks[1], "int")
            if not (1 <= i <= m):
                raise ParseError(path, lineno, toks[0][1], f"row index {i} outside 1..{m}")
            if not (1 <= j <= n):
                raise ParseError(path, lineno, toks[1][1], f"column index {j} outside 1..{n}")
            place(i - 1, j - 1, value(lineno, toks[2:]), lineno, toks[0][1])
    else:
        # column-major; packed lower triangle for the symmetric kinds
        if sym == "general":
            slots = [(i, j) for j in range(n) for i in range(m)]
        elif sym == "skew-symmetric":
            slots = [(i, j) for j in range(n) for i in range(j + 1, m)]
        else:
            slots = [(i, j) for j in range(n) for i in range(j, m)]
        if len(entries) != len(slots):
            where = entries[-1][0] + 1 if entries else ln + 1
            raise ParseError(path, where, 1, f"expected {len(slots)} values, found {len(entries)}")
        for (i, j), (lineno, toks) in zip(slots, entries):
            if len(toks) != per:
                raise ParseError(path, lineno, 1, f"expected {per} fields, found {len(toks)}")
            place(i, j, value(lineno, toks), lineno, toks[0][1])
    return a


def _fmt(x):
    return format(float(x), ".17g")


def write(path, a, symmetry="general", comment=None):
    """Write a dense array in ``array`` layout; ``symmetry`` may be symmetric/hermitian."""
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidInputError("only 1-D and 2-D arrays can be written")
    if symmetry not in SYMMETRIES:
        raise InvalidInputError(f"unknown symmetry {symmetry!r}")
    cplx = np.iscomplexobj(a)
    m, n = a.shape
    out = [f"%%MatrixMarket matrix array {'complex' if cplx else 'real'} {symmetry}"]
    if comment:
        out += [f"% {ln}" for ln in str(comment).splitlines()]
    out.append(f"{m} {n}")
    if symmetry == "general":
        cols = [a[:, j] for j in range(n)]
    elif symmetry == "skew-symmetric":
        cols = [a[j + 1 :, j] for j in range(n)]
    else:
        cols = [a[j:, j] for j in range(n)]
    for col in cols:
        for v in col:
            out.append(f"{_fmt(v.real)} {_fmt(v.imag)}" if cplx else _fmt(v))
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def write_vector_csv(path, values, header=("index", "value")):
    """``index,value`` rows with a 1-based index and 17 significant digits."""
    values = np.asarray(values)
    lines = [",".join(header)]
    lines += [f"{i},{_fmt(v)}" for i, v in enumerate(values, start=1)]
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
