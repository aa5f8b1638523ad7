"""Teachable task automation engine.

A natural-language command is parsed into a typed script with explicit
holes for unknown concepts and procedures.  The holes are then resolved
through a mixed-initiative dialog that combines verbal explanation with
demonstration on a simulated phone, and everything learned is stored in a
persistent knowledge base for reuse and automated replay.
"""

__version__ = "0.1.0"
