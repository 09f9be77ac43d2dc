from nct.transport.montecarlo import RunConfig, run_history, run_simulation
from nct.transport.source import GaussianSource, PointSource, Source, UniformSource
from nct.transport.tallies import ChunkTally, TallyGrid
