"""Command-line front end: bit-exact jet files, machine-readable reports,
configuration, and the documented exit-code table.

Exit codes: 0 success; 2 parse or validation failure; 3 genericity
failure; 4 truncation or exact-mode limitation; 5 internal consistency or
numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
import time

from .errors import (
    CrnfError,
    DomainError,
    GenericityError,
    ModeError,
    ParseError,
    StructuralError,
)
from .homological import formal_normalize, project_normal_space, solve_homological
from .hypersurface import (
    HypersurfaceJet,
    invariants_at_origin,
    model_phi,
    push_forward_frame,
)
from .maps import MapJet, ModelFrame, decompose_map
from .scalars import ExactComplex, QQ, fmt_q, parse_q
from .series import RealJet, surface_weights, unit_weights

CONFIG_FILE = "crnf.conf"
ENV_PREFIX = "CRNF_"


# ---------------------------------------------------------------------------
# jet file grammar
#
# header:  jet n=<n> r=<r> M=<M> mode=<exact|float> case=<2d|nd>
# real-jet term:  a_1 .. a_n b_1 .. b_n | j : re im
# holo-jet term:  a_1 .. a_n | k : re im
# exact scalars are printed num/den; float scalars as repr.
# ---------------------------------------------------------------------------


def _fmt_scalar(v, exact):
    if exact:
        return f"{fmt_q(v.re)} {fmt_q(v.im)}"
    c = complex(v)
    return f"{c.real!r} {c.imag!r}"


def _parse_scalar(retok, imtok, exact, lineno):
    try:
        if exact:
            return ExactComplex(parse_q(retok), parse_q(imtok))
        return complex(float(retok), float(imtok))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"line {lineno}: bad coefficient: {exc}")


def _real_sort_key(key):
    a, b, j = key
    return (sum(a) + sum(b) + j, a, b, j)


def _holo_sort_key(key):
    a, k = key
    return (sum(a) + k, a, k)


def print_jet(H):
    """Serialize a hypersurface jet; deterministic graded-lex term order."""
    phi = H.phi
    n = H.n
    case = "2d" if n == 1 else "nd"
    mode = "exact" if phi.exact else "float"
    r = H.r if H.r is not None else n - 1
    lines = [f"jet n={n} r={r} M={phi.M} mode={mode} case={case}"]
    for key in sorted(phi.c, key=_real_sort_key):
        a, b, j = key
        idx = " ".join(map(str, list(a) + list(b)))
        lines.append(f"{idx} | {j} : {_fmt_scalar(phi.c[key], phi.exact)}")
    return "\n".join(lines) + "\n"


def parse_jet(text):
    """Parse a jet file into a HypersurfaceJet on the anisotropic grid."""
    lines = text.splitlines()
    header = None
    hline = 0
    for i, ln in enumerate(lines):
        if ln.strip() and not ln.lstrip().startswith("#"):
            header = ln.strip()
            hline = i
            break
    if header is None or not header.startswith("jet "):
        raise ParseError("line 1: missing jet header")
    fields = {}
    for tok in header.split()[1:]:
        if "=" not in tok:
            raise ParseError(f"line {hline + 1}: bad header token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k] = v
    try:
        n = int(fields["n"])
        r = int(fields["r"])
        M = int(fields["M"])
        mode = fields["mode"]
        case = fields["case"]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"line {hline + 1}: bad header: {exc}")
    if mode not in ("exact", "float"):
        raise ParseError(f"line {hline + 1}: unknown mode {mode!r}")
    if case not in ("2d", "nd") or (case == "2d") != (n == 1):
        raise ParseError(f"line {hline + 1}: case tag does not match n")
    exact = mode == "exact"
    phi = RealJet.zero(n, surface_weights(n), M, exact)
    for i, ln in enumerate(lines[hline + 1:], start=hline + 2):
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        try:
            idx, rest = s.split("|", 1)
            jtok, ctok = rest.split(":", 1)
            exps = [int(t) for t in idx.split()]
            j = int(jtok)
            retok, imtok = ctok.split()
        except ValueError:
            raise ParseError(f"line {i}: malformed term line")
        if len(exps) != 2 * n:
            raise ParseError(f"line {i}: expected {2 * n} exponents")
        if any(e < 0 for e in exps) or j < 0:
            raise ParseError(f"line {i}: negative exponent")
        key = (tuple(exps[:n]), tuple(exps[n:]), j)
        if phi.key_weight(key) > M:
            raise ParseError(f"line {i}: term exceeds truncation weight {M}")
        v = _parse_scalar(retok, imtok, exact, i)
        if key in phi.c:
            raise ParseError(f"line {i}: duplicate term")
        phi.set_coeff(key, v)
    if not phi.is_real(tol=None if exact else 1e-9):
        raise DomainError("jet is not real (missing conjugate terms)")
    return HypersurfaceJet(phi, r=r, level="raw")


def print_map(F):
    n = F.n
    mode = "exact" if F.exact else "float"
    lines = [f"map n={n} M={F.M} mode={mode}"]
    names = [f"f{i + 1}" for i in range(n)] + ["g"]
    for name, comp in zip(names, F.components()):
        lines.append(f"component {name}")
        for key in sorted(comp.c, key=_holo_sort_key):
            a, k = key
            idx = " ".join(map(str, a))
            lines.append(f"{idx} | {k} : {_fmt_scalar(comp.c[key], F.exact)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# configuration: flags beat environment beats config file
# ---------------------------------------------------------------------------


def _load_config(path):
    conf = {}
    if path and os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            for i, ln in enumerate(fh, start=1):
                s = ln.strip()
                if not s or s.startswith("#"):
                    continue
                if "=" not in s:
                    raise ParseError(f"{path}:{i}: expected key=value")
                k, v = s.split("=", 1)
                conf[k.strip()] = v.strip()
    return conf


def _setting(name, flag_value, conf, default=None):
    if flag_value is not None:
        return flag_value
    env = os.environ.get(ENV_PREFIX + name.upper())
    if env is not None:
        return env
    if name in conf:
        return conf[name]
    return default


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

_BEGIN = "--- begin certified ---"
_END = "--- end certified ---"


def _report(command, body_lines, out):
    doc = [f"crnf report", f"command: {command}", _BEGIN]
    doc.extend(body_lines)
    doc.append(_END)
    out.write("\n".join(doc) + "\n")


def _family_name(n, key):
    if n == 1:
        a, b, j = key
        return f"Phi_{a[0]}{b[0]} at u^{j}"
    a, b, j = key
    return f"Phi_{{{','.join(map(str, a))};{','.join(map(str, b))}}} at u^{j}"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _read_input(path):
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")


def _parse_frame(spec, n, r):
    if spec is None:
        return None
    toks = [t for t in spec.split(",") if t.strip()]
    try:
        lam = QQ(toks[0])
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad frame dilation {toks[0]!r}")
    if n == 1:
        if len(toks) != 1:
            raise ParseError("2D frames take a single dilation parameter")
        return ModelFrame(n=1, r=0, lam=lam)
    rho = 1
    C = None
    rest = toks[1:]
    if rest and rest[-1] in ("1", "-1") and len(rest) in (1, (n - 1) ** 2 + 1):
        rho = int(rest[-1])
        rest = rest[:-1]
    if rest:
        m = n - 1
        if len(rest) != m * m:
            raise ParseError(
                "frame matrix needs %d entries, got %d" % (m * m, len(rest))
            )
        C = [
            [ExactComplex(QQ(rest[i * m + j])) for j in range(m)]
            for i in range(m)
        ]
    return ModelFrame(n=n, r=r, lam=lam, rho=rho, C=C)


def _prepare(H, M):
    if M is not None:
        if M > H.M:
            from .errors import TruncationError

            raise TruncationError(
                "requested weight %d exceeds the stored truncation %d" % (M, H.M)
            )
        phi = H.phi.truncate(M)
        H = HypersurfaceJet(phi, r=H.r, level=H.level)
    return H


def cmd_normalize(args, conf, out):
    H = parse_jet(_read_input(args.input))
    M = args.weight
    method = _setting("method", args.method, conf, "formal")
    mode = _setting("mode", args.mode, conf, "exact")
    if method not in ("formal", "pipeline", "both"):
        raise ParseError(f"unknown method {method!r}")
    if mode == "float" and method != "formal":
        raise ModeError("float mode supports the formal method only")
    H = _prepare(H, M)
    frame = _parse_frame(_setting("frame", args.frame, conf), H.n, H.r)
    body = []
    t0 = time.perf_counter()
    results = {}
    if method in ("formal", "both"):
        from .hypersurface import adapt_preliminary

        Hf = H
        if H.phi.exact and not H.is_simplified():
            Hu = HypersurfaceJet(
                H.phi.with_weights(unit_weights(H.n), H.M), r=H.r, level="raw"
            )
            Hf, _, _ = adapt_preliminary(Hu)
        results["formal"] = formal_normalize(Hf)
    if method in ("pipeline", "both"):
        from .pipeline import convergent_normalize

        results["pipeline"] = convergent_normalize(H)
    if method == "both":
        fn, cn = results["formal"], results["pipeline"]
        if fn.surface.phi == cn.surface.phi and fn.map == cn.map:
            body.append("agreement: exact")
        else:
            from .errors import ConsistencyError

            raise ConsistencyError(
                "formal and pipeline normal forms disagree"
            )
    chosen = results.get("pipeline") or results["formal"]
    H_norm, F = chosen.surface, chosen.map
    if frame is not None:
        H_norm = push_forward_frame(H_norm, frame)
        F = frame.to_map(F.M, H_norm.exact).compose(F)
    model = model_phi(H_norm.n, H_norm.r, H_norm.M, H_norm.exact)
    _, comp = project_normal_space(H_norm.phi - model, H_norm.n, H_norm.r)
    exact_zero = comp.is_zero()
    body.append("normal-form:")
    body.append(print_jet(H_norm).rstrip("\n"))
    body.append("map:")
    body.append(print_map(F).rstrip("\n"))
    body.append("certificates:")
    body.append(f"residual-max-weight: {H_norm.M}")
    body.append(f"normal-space-membership: {'exact' if exact_zero else 'FAILED'}")
    if method in ("formal", "both"):
        body.append(
            "formal-residual-zero: "
            + ("yes" if results["formal"].residual_certified else "no")
        )
    _report("normalize", body, out)
    dt = (time.perf_counter() - t0) * 1000
    print(f"timing-ms: {dt:.1f}", file=sys.stderr)
    return 0


def cmd_verify(args, conf, out):
    H = parse_jet(_read_input(args.input))
    n, r = H.n, H.r
    model = model_phi(n, r, H.M, H.phi.exact)
    _, comp = project_normal_space(H.phi - model, n, r)
    body = []
    if comp.is_zero():
        body.append("in normal form: yes")
    else:
        key = min(comp.c, key=_real_sort_key)
        body.append("in normal form: no")
        body.append(f"first violation: {_family_name(n, key)}")
    _report("verify", body, out)
    return 0


def cmd_invariants(args, conf, out):
    H = parse_jet(_read_input(args.input))
    Hu = HypersurfaceJet(
        H.phi.with_weights(unit_weights(H.n), H.M), r=H.r, level="raw"
    )
    rep = invariants_at_origin(Hu)
    body = [
        f"dimension: {H.n + 1}",
        f"levi-kernel-dim: {rep.kernel_dim}",
        f"signature: {rep.signature[0]} {rep.signature[1]}",
        f"generic-degeneracy: {'yes' if rep.generic else 'no'}",
    ]
    if rep.cubic is not None:
        body.append(
            "degenerate-cubic: "
            + (_fmt_scalar(rep.cubic, H.phi.exact))
        )
    if not rep.generic and rep.reason:
        body.append(f"reason: {rep.reason}")
    _report("invariants", body, out)
    return 0


def cmd_solve(args, conf, out):
    H = parse_jet(_read_input(args.input))
    n, r = H.n, H.r
    psi = H.phi
    M = args.weight if args.weight is not None else psi.M
    wu = psi.wu
    fs = None
    g = None
    phistar = psi._like({})
    for m in range(wu + 1, M + 1):
        comp_m = psi.weighted_component(m)
        if comp_m.is_zero():
            continue
        sol = solve_homological(comp_m, n, r)
        if fs is None:
            fs = list(sol.comps[:n])
            g = sol.comps[n]
        else:
            fs = [fs[i] + sol.comps[i] for i in range(n)]
            g = g + sol.comps[n]
        phistar = phistar + sol.npart
    if fs is None:
        from .series import HoloJet

        fs = [
            HoloJet.zero(n, psi.weights, psi.M, psi.exact) for _ in range(n)
        ]
        g = HoloJet.zero(n, psi.weights, psi.M, psi.exact)
    idmap = MapJet.identity(n, psi.weights, psi.M, psi.exact)
    F = MapJet([idmap.fs[i] + fs[i] for i in range(n)], idmap.g + g)
    body = ["map:"]
    body.append(print_map(F).rstrip("\n"))
    body.append("normal-space-part:")
    Hstar = HypersurfaceJet(phistar, r=r, level="raw")
    body.append(print_jet(Hstar).rstrip("\n"))
    _report("solve", body, out)
    return 0


def cmd_chain(args, conf, out):
    from .chains import AnalyticSurface, trace_chain

    H = parse_jet(_read_input(args.surface))
    if not H.phi.exact:
        raise ModeError("chain tracing needs an exact defining polynomial")
    graph = dict(H.phi.c)
    S = AnalyticSurface.from_graph(graph, H.n, H.r)
    coords = [float(t) for t in args.p0.replace(",", " ").split()]
    if len(coords) != 2 * H.n + 2:
        raise ParseError(
            "p0 needs %d real coordinates, got %d" % (2 * H.n + 2, len(coords))
        )
    zs = tuple(
        complex(coords[2 * i], coords[2 * i + 1]) for i in range(H.n)
    )
    p0 = (zs, complex(coords[2 * H.n], coords[2 * H.n + 1]))
    length = float(_setting("length", args.length, conf, "0.1"))
    step = float(_setting("step", args.step, conf, "1e-3"))
    tr = trace_chain(S, p0, length, step)
    for zsw in tr.points:
        zets, w = zsw
        vals = []
        for z in list(zets) + [w]:
            vals.append(repr(complex(z).real))
            vals.append(repr(complex(z).imag))
        out.write(" ".join(vals) + "\n")
    worst_surface = max(d["on_surface"] for d in tr.slope_residuals)
    worst_sigma = max(d["on_sigma"] for d in tr.slope_residuals)
    print(
        f"points: {len(tr.points)} max-surface-residual: {worst_surface:.3e} "
        f"max-degeneracy-residual: {worst_sigma:.3e}",
        file=sys.stderr,
    )
    return 0


def cmd_selftest(args, conf, out):
    import random

    from .homological import cm_operator
    from .pipeline import convergent_normalize

    checks = []

    def run(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as exc:  # noqa: BLE001 - report, then fail the run
            checks.append((name, False, f"{type(exc).__name__}: {exc}"))

    def homological_roundtrip():
        rng = random.Random(7)
        for _ in range(5):
            psi = RealJet.zero(1, surface_weights(1), 8, True)
            for _ in range(4):
                a, b, j = rng.randint(1, 3), rng.randint(1, 3), rng.randint(0, 1)
                key = ((a,), (b,), j)
                if psi.key_weight(key) > 8 or psi.key_weight(key) < 5:
                    continue
                c = ExactComplex(QQ(rng.randint(-2, 2)), QQ(rng.randint(-2, 2)))
                psi.set_coeff(key, psi.coeff(key) + c)
                psi.set_coeff(((b,), (a,), j), psi.coeff(((b,), (a,), j))
                              + c.conjugate())
            for m in range(4, 9):
                comp = psi.weighted_component(m)
                if comp.is_zero():
                    continue
                sol = solve_homological(comp, 1, 0)
                L = cm_operator(sol.comps, 1, 0)
                resid = comp - L.scale(ExactComplex(2)) - sol.npart
                if not resid.weighted_component(m).is_zero():
                    raise AssertionError("homological split residual nonzero")

    def pipeline_agreement():
        phi = model_phi(1, 0, 8, True)
        phi.set_coeff(((2,), (2,), 0), phi.coeff(((2,), (2,), 0))
                      + ExactComplex(QQ(1, 3)))
        H = HypersurfaceJet(phi, r=0, level="raw")
        cn = convergent_normalize(H)
        fn = formal_normalize(H)
        assert cn.surface.phi == fn.surface.phi and cn.map == fn.map

    def model_chain():
        from .chains import AnalyticSurface, trace_chain

        S = AnalyticSurface.model(1, 0)
        tr = trace_chain(S, ((0j,), 0j), 0.02, 1e-3)
        dev = max(
            max(abs(complex(p[0][0])), abs(complex(p[1]).imag))
            for p in tr.points
        )
        assert dev <= 1e-9

    run("homological-roundtrip", homological_roundtrip)
    run("pipeline-equals-formal", pipeline_agreement)
    run("model-chain", model_chain)
    body = [
        f"{name}: {'PASS' if ok else 'FAIL ' + msg}" for name, ok, msg in checks
    ]
    _report("selftest", body, out)
    return 0 if all(ok for _, ok, _ in checks) else 5


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="crnf",
        description=(
            "Exact normal forms at a generic Levi degeneracy and numerical "
            "degenerate-chain tracing."
        ),
    )
    ap.add_argument("--config", default=CONFIG_FILE, help="flat key=value file")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="compute the normal form of a jet")
    p.add_argument("input")
    p.add_argument("--weight", type=int, default=None)
    p.add_argument("--method", choices=("formal", "pipeline", "both"),
                   default=None)
    p.add_argument("--frame", default=None,
                   help="model-automorphism frame lambda[,C entries][,rho]")
    p.add_argument("--mode", choices=("exact", "float"), default=None)
    p.set_defaults(fn=cmd_normalize)

    p = sub.add_parser("verify", help="check normal-space membership")
    p.add_argument("input")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("invariants", help="origin invariants of a raw jet")
    p.add_argument("input")
    p.set_defaults(fn=cmd_invariants)

    p = sub.add_parser("solve", help="homological solve of a right-hand side")
    p.add_argument("input")
    p.add_argument("--weight", type=int, default=None)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("chain", help="trace a degenerate chain")
    p.add_argument("surface")
    p.add_argument("--p0", required=True,
                   help="start point, 2n+2 reals (Re z1 Im z1 .. Re w Im w)")
    p.add_argument("--length", default=None)
    p.add_argument("--step", default=None)
    p.set_defaults(fn=cmd_chain)

    p = sub.add_parser("selftest", help="run reduced property suites")
    p.set_defaults(fn=cmd_selftest)
    return ap


def main(argv=None):
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        conf = _load_config(args.config)
        code = args.fn(args, conf, sys.stdout)
    except CrnfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return code


if __name__ == "__main__":
    sys.exit(main())
