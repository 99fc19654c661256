from src.api.fixtures import get_fixture
from src.core.config import SimulationConfig, StabilizerConfig, SynthesisConfig
from src.core.stabilizer import Stabilizer

# 1. Pick a bundled example and load its model file
fixture = get_fixture("example1")
parsed = fixture.load()

# 2. Initialize the Stabilizer with your configuration
stabilizer = Stabilizer(
    config=StabilizerConfig(
        synthesis=SynthesisConfig(coupling_scale=parsed.options.coupling_scale, seed=parsed.options.seed),
        simulation=SimulationConfig(horizon=fixture.horizon, ensemble=10),
    )
)

# 3. Synthesize the feedback, then simulate the closed loop
result = stabilizer.synthesize(parsed.model, parsed.target)
if result.feasible:
    run = stabilizer.simulate(result.closed_loop, parsed.target)
    print(run.frame.groupby("trajectory_id").tail(1))
    print(f"verification passed: {run.verification.passed}")
else:
    print(f"infeasible: {result.infeasibility_reason}")
