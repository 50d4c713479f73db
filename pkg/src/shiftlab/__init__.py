"""shiftlab: a desk-scale continual-learning laboratory.

A stream of multimodal captioning and question-answering tasks is learned
one task at a time by a tiny adapter-tuned language model; the package
measures how much earlier tasks degrade and implements pseudo-target
rehearsal, instruction distillation, and parameter fusion to reduce it.
"""
__version__ = "0.1.0"
