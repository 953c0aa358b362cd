#!/usr/bin/env python3
"""Build the benchmark CSV files under data/.

Output format: comma-separated numeric features, integer class label
(1-based, contiguous) in the last column, no header.

Sources are PyPI wheels that vendor the UCI files:
  * keel-ds              -> vehicle (KEEL "balanced" copy of UCI vehicle)
  * imbalanced-databases -> glass (UCI glass.data) and the KEEL
                            one-vs-rest splits of ecoli and yeast.

ecoli and yeast are only shipped as binarised splits.  Every split
keeps the original feature vectors, so the multiclass label of a row is
recovered by grouping feature vectors on their membership pattern
across all splits.  The resulting groups have exactly the UCI class
sizes, which is asserted below.
"""
import collections
import glob
import os
import subprocess
import sys
import tempfile
import zipfile

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "data")

ECOLI_CLASSES = [("cp", 143), ("im", 77), ("pp", 52), ("imU", 35), ("om", 20),
                 ("omL", 5), ("imL", 2), ("imS", 2)]
YEAST_CLASSES = [("CYT", 463), ("NUC", 429), ("MIT", 244), ("ME3", 163), ("ME2", 51),
                 ("ME1", 44), ("EXC", 35), ("VAC", 30), ("POX", 20), ("ERL", 5)]


def fetch(pkg, dest):
    subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                           pkg, "-d", dest])
    whl = [f for f in os.listdir(dest) if f.endswith(".whl")][0]
    zipfile.ZipFile(os.path.join(dest, whl)).extractall(os.path.join(dest, "x"))
    return os.path.join(dest, "x")


def load_keel(path):
    rows = []
    for line in open(path):
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        parts = [s.strip() for s in line.split(",")]
        rows.append((parts[:-1], parts[-1]))
    return rows


def key(feats):
    return tuple(round(float(v), 4) for v in feats)


def is_mangled(rows):
    # Several ecoli splits store "0.40" as "4.0" and "0.04" as "4.0" (the
    # fractional digits with trailing zeros dropped).  The map is still
    # injective on whole ecoli rows.
    return max(float(v) for f, _ in rows for v in f) > 1.5


def mangle(feats):
    out = []
    for v in feats:
        s = "%.2f" % float(v)
        if s == "1.00":
            out.append(1.0)
        else:
            digits = s.split(".")[1].rstrip("0")
            out.append(float(int(digits)) if digits else 0.0)
    return tuple(out)


def recover_multiclass(split_files, n, classes):
    splits = {os.path.basename(f): load_keel(f) for f in split_files}
    mangled = {name: is_mangled(rows) for name, rows in splits.items()}
    base = next(rows for name, rows in sorted(splits.items())
                if len(rows) == n and not mangled[name])
    keys = [key(f) for f, _ in base]
    real = {key(f): f for f, _ in base}
    mult = collections.Counter(keys)
    counts = {}
    for name, rows in splits.items():
        counts[name] = collections.Counter((key(f), lab) for f, lab in rows)
    groups = collections.defaultdict(list)
    for fv in sorted(set(keys)):
        m = mult[fv]
        sig = []
        for name in sorted(splits):
            k = key(mangle(real[fv])) if mangled[name] else fv
            sig.append((counts[name][(k, "positive")] / m, counts[name][(k, "negative")] / m))
        sig = tuple(sig)
        groups[sig].append(fv)
    # A few splits drop a row; fold such singleton patterns into the
    # larger group they agree with on every split where both appear.
    def compatible(a, b):
        return all(x == y or x == (0, 0) for x, y in zip(a, b))

    for sig in sorted(groups, key=lambda s: len(groups[s])):
        if len(groups) == len(classes):
            break
        hosts = [h for h in groups if h != sig and len(groups[h]) > len(groups[sig])
                 and compatible(sig, h)]
        if len(hosts) == 1:
            groups[hosts[0]].extend(groups.pop(sig))
    sizes = sorted(((sum(mult[fv] for fv in g), g) for g in groups.values()),
                   key=lambda t: -t[0])
    assert len(sizes) == len(classes), (len(sizes), len(classes))
    got = sorted(s for s, _ in sizes)
    want = sorted(s for _, s in classes)
    assert got == want, (got, want)
    label_of = {}
    used = set()
    for name, size in classes:
        cands = [i for i, (s, _) in enumerate(sizes) if s == size and i not in used]
        i = cands[0]
        used.add(i)
        for fv in sizes[i][1]:
            label_of[fv] = classes.index((name, size)) + 1
    return [(f, label_of[key(f)]) for f, _ in base]


def write(name, rows):
    path = os.path.join(OUT, name + ".csv")
    with open(path, "w") as fh:
        for feats, label in rows:
            fh.write(",".join(feats) + "," + str(label) + "\n")
    print(f"{path}: {len(rows)} rows, k={len(set(l for _, l in rows))}")


def main():
    os.makedirs(OUT, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        keel = fetch("keel-ds==0.2.5", os.path.join(tmp, "keel"))
        imb = fetch("imbalanced-databases==0.1.1", os.path.join(tmp, "imb"))

        vehicle = load_keel(os.path.join(keel, "keel_ds/data/balanced/raw/vehicle.dat"))
        names = sorted(set(lab for _, lab in vehicle))
        write("vehicle", [(f, names.index(lab) + 1) for f, lab in vehicle])

        glass = []
        for line in open(os.path.join(imb, "imbalanced_databases/data/glass/glass.data.txt")):
            parts = line.strip().split(",")
            if len(parts) == 11:
                glass.append((parts[1:10], int(parts[10])))
        present = sorted(set(l for _, l in glass))
        write("glass", [(f, present.index(l) + 1) for f, l in glass])

        data = os.path.join(imb, "imbalanced_databases/data")
        ecoli = sorted(glob.glob(os.path.join(data, "ecoli[-0-9]*", "*.dat")))
        write("ecoli", recover_multiclass(ecoli, 336, ECOLI_CLASSES))
        yeast = sorted(glob.glob(os.path.join(data, "yeast[-0-9]*", "*.dat")))
        write("yeast", recover_multiclass(yeast, 1484, YEAST_CLASSES))


if __name__ == "__main__":
    main()
