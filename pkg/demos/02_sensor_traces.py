"""
Counting steps and sleep from an accelerometer stream
=====================================================

A synthetic trace is built from walk and idle segments, then replayed
through the on-device step counter and sleep tracker.
"""

import numpy as np

from rimsim import sensorsim as ss
from rimsim.sensorsim import AccelSample, SensorConfig, TrackerState

cfg = SensorConfig()
rng = np.random.Generator(np.random.PCG64(0))

# A lunchtime walk: 10 minutes at 100 steps per minute.
walk = ss.synth_trace(ss.schedule_from([("walk", 10, 100), ("idle", 20)],
                                       ss.at("2025-04-18", "12:00")), rng, cfg)
print(ss.process_trace(walk, cfg))

# Debounce: two peaks 100 ms apart count once; a third peak 500 ms later counts.
s = TrackerState()
for sample in (AccelSample(1000, 3, 0, 0), AccelSample(1100, 0, 0, 0.5),
               AccelSample(1500, 3, 0, 0)):
    s = ss.step_update(s, sample, cfg)
    print(f"t={sample.t} ms  |a|={sample.magnitude:.2f}  steps={s.step_count}  "
          f"distance={s.distance_m} m")

# A night: last movement at 23:00, first movement at 07:00.
night = [AccelSample(ss.at("2025-04-18", "23:00"), 3.5, 0, 0),
         AccelSample(ss.at("2025-04-19", "07:00"), 0, 0, 0.1),
         AccelSample(ss.at("2025-04-19", "07:00") + 1, 0, 3.5, 0)]
print("sleep hours:", round(ss.process_trace(night, cfg).sleep_hrs, 3))

# The tracker is a pure state machine, so a stream split in two gives the
# same answer as the whole stream.
state = ss.replay(walk[:500], cfg)
state = ss.replay(walk[500:], cfg, state)
print("streamed steps:", state.step_count)
