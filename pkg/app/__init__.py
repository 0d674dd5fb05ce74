# Zeno coherence protection of a Rydberg spin qubit
