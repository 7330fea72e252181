import os
import shutil

# Per-sector generated files; configs, fixtures and price data are kept
GENERATED = [
    "prices_train.csv", "coverage.csv", "stats.json",
    "frontier.json", "frontier_weights.csv", "frontier.svg",
    "eigen.json", "eigen_candidates.csv", "explained_variance.svg",
    "training_summary.csv", "predictions.json", "predictions.csv",
    "bundle.json", "checkpoints", "figures",
]


def clean_sector_outputs(output_folder="output", keep_checkpoints=False):
    print(f"Cleaning sector outputs in {output_folder}/")

    if not os.path.exists(output_folder):
        print(f"  Folder {output_folder} does not exist.")
        return

    for sector_dir in sorted(os.listdir(output_folder)):
        sector_path = os.path.join(output_folder, sector_dir)
        if not os.path.isdir(sector_path):
            continue

        names = set(GENERATED)
        names.update(f for f in os.listdir(sector_path) if f.startswith("table_") and f.endswith(".csv"))
        if keep_checkpoints:
            names.discard("checkpoints")

        for name in sorted(names):
            path = os.path.join(sector_path, name)
            if not os.path.exists(path):
                continue
            try:
                if os.path.isdir(path):
                    shutil.rmtree(path)
                else:
                    os.remove(path)
                print(f"  Removed: {path}")
            except PermissionError:
                print(f"  [Error] Access denied: {path} - close programs using it.")

    for name in ("summary.csv", "summary.json"):
        path = os.path.join(output_folder, name)
        if os.path.exists(path):
            os.remove(path)
            print(f"  Removed: {path}")

    print("Cleaning done.")


if __name__ == "__main__":
    import sys

    clean_sector_outputs(*(sys.argv[1:2] or ["output"]), keep_checkpoints="--keep-checkpoints" in sys.argv)
