"""ifdkit: interpretable image-forgery investigation toolkit.

Low-level forensic tools, a tagged multi-turn tool-calling protocol, a
budgeted agent loop, verifiable process rewards and GRPO scoring helpers.
"""

__version__ = "0.1.0"
