"""kgchat: knowledge-graph grounded dialogue pipeline.

Topic rough recall -> topic prediction -> knowledge ranking -> grounded
generation, with training, evaluation, an interactive REPL, and an HTTP
service. Neural parts are toy-scale trainable transformers.
"""

__version__ = "0.1.0"
