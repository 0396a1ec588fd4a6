from hypothesis import strategies as st

from termerr.episode import EpisodeSpec, Reward


@st.composite
def sequences(draw, max_len=16, min_len=1):
    steps = draw(st.lists(st.sampled_from([Reward.POSITIVE, Reward.NEGATIVE]), min_size=min_len, max_size=max_len))
    return tuple(steps)


@st.composite
def admissible_specs(draw, max_neg=200, max_margin=2000):
    x = draw(st.integers(1, max_neg))
    r = draw(st.integers(1, max_margin))
    return EpisodeSpec.from_margin(x, r)

