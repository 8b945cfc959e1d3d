"""Size-tempered task sampling: how the exponent reshapes mixture weights."""

import numpy as np

from codepretrain import TaskMixture, TaskSpec, mixture_probs, sample_task


def main():
    sizes = {"summarize": 9000, "translate": 900, "refine": 300, "defect": 90}
    names = list(sizes)
    print(f"{'alpha':>6} " + " ".join(f"{n:>10}" for n in names))
    for alpha in (0.0, 0.3, 0.5, 0.7, 1.0):
        probs = mixture_probs(list(sizes.values()), alpha)
        print(f"{alpha:>6.1f} " + " ".join(f"{q:>10.4f}" for q in probs))
    print("\nalpha < 1 shifts probability mass toward the small tasks;")
    print("alpha = 1 is proportional and alpha = 0 is uniform.")

    mixture = TaskMixture(
        tasks=tuple(TaskSpec(n, s) for n, s in sizes.items()), alpha=0.7
    )
    rng = np.random.default_rng(0)
    draws = [sample_task(mixture, rng) for _ in range(20_000)]
    print("\nempirical frequencies at alpha=0.7 over 20k draws:")
    for name, q in zip(names, mixture.probs):
        freq = draws.count(name) / len(draws)
        print(f"  {name:<10} target {q:.4f}  observed {freq:.4f}")


if __name__ == "__main__":
    main()
