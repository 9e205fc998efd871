"""probsep: exact reasoning tools for a small probabilistic language.

The package splits into layers:

- values / lang: the value domain and the command language, with
  variable-kind inference and the read/write/modified variable analyses
  used by proof-rule side conditions.
- dist: finite distributions with exact rational weights.
- interp: the distribution-transformer interpreter and an independent
  per-path oracle.
- assertions / logic: a probabilistic separation logic, its model
  checker over finite universes, and a validator for proof rules and
  proof scripts.
- security: trace-distribution extraction and statistical secrecy
  reports for oblivious-computation claims.
- studies: executable models of five oblivious algorithms at small
  parameters.
- surface / pretty / cli: concrete syntax and the command-line tool.
"""

__version__ = "0.1.0"
