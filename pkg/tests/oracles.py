"""Brute-force reference computations.

Everything here recomputes pipeline results from first principles over
plain dicts: linear scans, nested-loop grouping, and direct arithmetic.
It shares no grouping, merging, or tallying code with the package, so
agreement between the two is meaningful.
"""

import hashlib
import math

CANONICAL = ("pid", "prefix", "first_name", "last_name", "year_of_birth", "sex", "address_area")
MAIN = ("pid", "first_name", "last_name", "year_of_birth", "prefix", "sex")
COMBINED = ("first_name", "last_name", "year_of_birth", "sex", "address_area")

ORACLE_AGE_LABELS = ["%d-%d" % (lo, lo + 4) for lo in range(0, 70, 5)] + [">=70"]


def row_dict(record):
    """Flatten a RegisterRecord into a plain dict of its present values."""
    row = {"register_id": record.register_id, "record_timestamp": record.record_timestamp}
    for name in CANONICAL:
        value = getattr(record, name)
        if isinstance(value, str):
            row[name] = value
    for name, value in record.extra.items():
        if isinstance(value, str):
            row[name] = value
    return row


def salted_sha256(value, salt_bytes):
    return hashlib.sha256(salt_bytes + value.encode("utf-8")).hexdigest()


def oracle_dedup(rows):
    """Within one register: rows sharing a pid collapse to the newest row
    when the newest rows agree on the main variables, otherwise the whole
    group disappears."""
    out = [r for r in rows if "pid" not in r]
    groups = []
    for row in rows:
        if "pid" not in row:
            continue
        for key, members in groups:
            if key == row["pid"]:
                members.append(row)
                break
        else:
            groups.append((row["pid"], [row]))
    for _, members in groups:
        newest_ts = max(r["record_timestamp"] for r in members)
        newest = [r for r in members if r["record_timestamp"] == newest_ts]
        signatures = {tuple(r.get(v) for v in MAIN) for r in newest}
        if len(signatures) == 1:
            out.append(newest[0])
    return out


def oracle_integrate(rows_per_register, fallback=True):
    """Nested-loop three-step join with timeline replacement.

    Returns (merged rows, dropped count). Each merged row is a dict of
    surviving field values plus _sources (contributing register ids) and
    _ts (newest contributing timestamp).
    """
    all_rows = [row for rows in rows_per_register for row in rows]
    pid_groups = []
    combined_groups = []
    dropped = 0
    for row in all_rows:
        if "pid" in row:
            for key, members in pid_groups:
                if key == row["pid"]:
                    members.append(row)
                    break
            else:
                pid_groups.append((row["pid"], [row]))
        elif fallback and all(name in row for name in COMBINED):
            combo = tuple(row[name] for name in COMBINED)
            for key, members in combined_groups:
                if key == combo:
                    members.append(row)
                    break
            else:
                combined_groups.append((combo, [row]))
        else:
            dropped += 1

    merged_rows = []
    for _, members in pid_groups + combined_groups:
        merged_rows.append(_merge(members))
    return merged_rows, dropped


def _merge(members):
    fields = set()
    for row in members:
        fields.update(k for k in row if k not in ("register_id", "record_timestamp"))
    merged = {}
    for name in fields:
        best = None
        for row in members:
            if name not in row:
                continue
            candidate = (-row["record_timestamp"], row["register_id"], row[name])
            if best is None or candidate < best:
                best = candidate
        merged[name] = best[2]
    merged["_sources"] = tuple(sorted({row["register_id"] for row in members}))
    merged["_ts"] = max(row["record_timestamp"] for row in members)
    return merged


def oracle_members(merged_rows, kind, census_area_codes, min_registers=2):
    """Framework membership by direct rule application to each merged row."""
    members = []
    for row in merged_rows:
        if census_area_codes:
            if row.get("address_area") not in census_area_codes:
                continue
        if kind == "F1":
            ok = row.get("address_area") in census_area_codes
        elif kind == "F2":
            ok = "pid" in row
        elif kind == "F3":
            ok = all(name in row for name in MAIN)
        elif kind == "F4":
            ok = any(name in row for name in MAIN)
        elif kind == "F5":
            ok = len(row["_sources"]) >= min_registers
        else:
            raise ValueError(kind)
        if ok:
            members.append(row)
    return members


def oracle_age_label(yob_text, census_year):
    age = census_year - int(yob_text)
    if age >= 70:
        return ">=70"
    return ORACLE_AGE_LABELS[age // 5]


def oracle_tallies(members, census_year):
    by_sex = {}
    by_age = {}
    for row in members:
        sex = row.get("sex") if row.get("sex") in ("F", "M") else "unknown"
        by_sex[sex] = by_sex.get(sex, 0) + 1
        if "year_of_birth" in row:
            age = oracle_age_label(row["year_of_birth"], census_year)
        else:
            age = "unknown"
        by_age[age] = by_age.get(age, 0) + 1
    return by_sex, by_age


def oracle_rates(members, reference_pids):
    member_pids = {row["pid"] for row in members if "pid" in row}
    t_and_r = sum(1 for pid in reference_pids if pid in member_pids)
    coverage = t_and_r / len(reference_pids)
    overcoverage = (len(members) - t_and_r) / len(members)
    return coverage, overcoverage, t_and_r


def oracle_chd_squared(counts_p, counts_q):
    total_p = sum(counts_p)
    total_q = sum(counts_q)
    acc = 0.0
    for a, b in zip(counts_p, counts_q):
        p = a / total_p
        q = b / total_q
        if p + q > 0:
            acc += (p - q) ** 2 / (p + q)
    return acc / 2.0


def oracle_chi2(counts_a, counts_b):
    row_a, row_b = sum(counts_a), sum(counts_b)
    grand = row_a + row_b
    stat = 0.0
    for a, b in zip(counts_a, counts_b):
        column = a + b
        for observed, row_total in ((a, row_a), (b, row_b)):
            expected = row_total * column / grand
            stat += (observed - expected) ** 2 / expected
    return stat


def chi2_tail_by_quadrature(x, df):
    """Upper-tail chi-square probability by adaptive Simpson integration
    of the density from x out to a far cutoff."""

    def density(t):
        if t <= 0:
            return 0.0
        k = df / 2.0
        return math.exp((k - 1) * math.log(t) - t / 2.0 - k * math.log(2.0) - math.lgamma(k))

    def simpson(f, a, b, fa, fm, fb, eps, whole, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        if depth <= 0 or abs(left + right - whole) <= 15 * eps:
            return left + right + (left + right - whole) / 15
        return simpson(f, a, m, fa, flm, fm, eps / 2, left, depth - 1) + simpson(
            f, m, b, fm, frm, fb, eps / 2, right, depth - 1
        )

    upper = max(x + 40 * df + 200, 2 * x)
    fa, fm, fb = density(x), density((x + upper) / 2), density(upper)
    whole = (upper - x) / 6 * (fa + 4 * fm + fb)
    return simpson(density, x, upper, fa, fm, fb, 1e-12, whole, 50)
