"""Molecular mutagenicity features and classifiers.

Pipeline stages: SMILES ingestion (`ingest`, `smiles`), per-molecule
spectral operators (`graphcore`), geometric graph scattering (`gst`),
2D image scattering (`scatter2d`), a GIN embedding network (`gnn`), the
molecule-similarity meta-graph classifier (`metagraph`), the metric and
cross-validation layer (`evalhead`), and the `geoscatt` CLI (`cli`).
"""

__version__ = "0.1.0"
