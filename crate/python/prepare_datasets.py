"""Convert the Cora and Citeseer citation datasets into the toolkit's text formats.

The raw files are taken from the PGL wheel on PyPI, which ships the original
LINQS Cora release (cora.content / cora.cites) and the Planetoid pickles for
Citeseer. Output layout, per dataset:

    data/<name>/edges.txt      "src dst" per undirected edge
    data/<name>/node_text.txt  "node word count" per nonzero feature
    data/<name>/labels.txt     "node label" per labelled node

Usage:
    python3 python/prepare_datasets.py [--wheel path/to/pgl.whl] [--out data]
"""

import argparse
import glob
import io
import os
import pickle
import subprocess
import sys
import tempfile
import zipfile

import numpy as np

PGL_VERSION = "2.2.6"


def fetch_wheel(dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
         f"pgl=={PGL_VERSION}", "-d", dest],
        check=True,
    )
    wheels = glob.glob(os.path.join(dest, "pgl-*.whl"))
    if not wheels:
        raise SystemExit("pgl wheel not found after download")
    return wheels[0]


def write_dataset(out_dir, edges, features, labels):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "edges.txt"), "w") as f:
        for a, b in sorted(edges):
            f.write(f"{a} {b}\n")
    with open(os.path.join(out_dir, "node_text.txt"), "w") as f:
        for node, words in enumerate(features):
            for word in words:
                f.write(f"{node} f{word} 1\n")
    with open(os.path.join(out_dir, "labels.txt"), "w") as f:
        for node, label in sorted(labels.items()):
            f.write(f"{node} {label}\n")
    print(f"{out_dir}: {len(features)} nodes, {len(edges)} edges, "
          f"{sum(len(w) for w in features)} text entries, {len(labels)} labelled")


def undirected(pairs):
    edges = set()
    for a, b in pairs:
        if a == b:
            continue
        edges.add((min(a, b), max(a, b)))
    return edges


def convert_cora(wheel, out_dir):
    content = wheel.read("pgl/data/cora/cora.content").decode()
    cites = wheel.read("pgl/data/cora/cora.cites").decode()
    ids, features, classes = {}, [], []
    for line in content.splitlines():
        parts = line.split()
        if not parts:
            continue
        ids[parts[0]] = len(ids)
        bits = parts[1:-1]
        features.append([k for k, v in enumerate(bits) if v != "0"])
        classes.append(parts[-1])
    class_ids = {c: i for i, c in enumerate(sorted(set(classes)))}
    pairs = []
    for line in cites.splitlines():
        parts = line.split()
        if len(parts) == 2 and parts[0] in ids and parts[1] in ids:
            pairs.append((ids[parts[0]], ids[parts[1]]))
    labels = {i: class_ids[c] for i, c in enumerate(classes)}
    write_dataset(out_dir, undirected(pairs), features, labels)


def load_pickle(wheel, name):
    data = wheel.read(f"pgl/data/citeseer/ind.citeseer.{name}")
    return pickle.load(io.BytesIO(data), encoding="latin1")


def convert_citeseer(wheel, out_dir):
    allx, ally = load_pickle(wheel, "allx"), load_pickle(wheel, "ally")
    tx, ty = load_pickle(wheel, "tx"), load_pickle(wheel, "ty")
    graph = load_pickle(wheel, "graph")
    test_index = [
        int(x)
        for x in wheel.read("pgl/data/citeseer/ind.citeseer.test.index").decode().split()
    ]
    n = len(graph)
    features = [[] for _ in range(n)]
    labels = {}
    allx = allx.tocsr()
    for i in range(allx.shape[0]):
        features[i] = sorted(allx.indices[allx.indptr[i]:allx.indptr[i + 1]].tolist())
        if ally[i].sum() > 0:
            labels[i] = int(np.argmax(ally[i]))
    # Planetoid stores test rows in a separate block; some test ids have no row
    # at all and stay featureless and unlabelled.
    tx = tx.tocsr()
    for row, node in enumerate(test_index):
        features[node] = sorted(tx.indices[tx.indptr[row]:tx.indptr[row + 1]].tolist())
        if ty[row].sum() > 0:
            labels[node] = int(np.argmax(ty[row]))
    pairs = [(a, b) for a, nbrs in graph.items() for b in nbrs]
    write_dataset(out_dir, undirected(pairs), features, labels)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--wheel", help="path to an already downloaded pgl wheel")
    parser.add_argument("--out", default="data")
    args = parser.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        wheel_path = args.wheel or fetch_wheel(tmp)
        with zipfile.ZipFile(wheel_path) as wheel:
            convert_cora(wheel, os.path.join(args.out, "cora"))
            convert_citeseer(wheel, os.path.join(args.out, "citeseer"))


if __name__ == "__main__":
    main()
