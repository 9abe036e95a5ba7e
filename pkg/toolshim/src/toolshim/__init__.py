"""Wire-contract runtime for manifest-described tools.

One shim process per invocation: a structured input document arrives on
stdin, the manifest's schemas are enforced, the entrypoint runs, and exactly
one structured output document leaves on stdout with a matching exit code.
Errors are always explicit in-band failures; nothing is defaulted and no
exception is swallowed.
"""

__version__ = "0.1.0"
