# Pydantic schemas for states, operators, sequences, traces and run configuration
