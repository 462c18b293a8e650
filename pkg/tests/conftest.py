import hypothesis
import numpy as np

np.seterr(all="raise", under="ignore")

hypothesis.settings.register_profile(
    "suite", max_examples=60, derandomize=True, deadline=None
)
hypothesis.settings.load_profile("suite")
