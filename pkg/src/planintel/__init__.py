"""Document intelligence for statutory planning files.

Layered roughly bottom-up: docmodel (bundles), providers/pipeline (suggestion
tasks), extraction/pii/vischeck (task products), review (human gate), redaction
(irreversible commit), audit (hash-chained log), evalharness (corpus + scoring),
roi (business case), service (HTTP + store), cli.
"""

__version__ = "0.1.0"
