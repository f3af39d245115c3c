import argparse
from pathlib import Path

import requests

from constants import DATA_REPO_URL

# Output directory
DATA_DIR = Path("data")


def output_path_for(url: str, data_dir: Path = DATA_DIR) -> Path:
    name = url.rstrip("/").split("/")[-1].split("?")[0]
    if not name:
        raise ValueError(f"Cannot derive a file name from {url}")
    return data_dir / name


def download_and_save(url: str, output_path: Path, force: bool = False) -> bool:
    if output_path.exists() and not force:
        print(f"-> Skipping {output_path.name}: already present (use --force to refresh)")
        return True
    print(f"-> Downloading {output_path.name} from {url.split('//')[1].split('/')[0]}...")
    output_path.parent.mkdir(parents=True, exist_ok=True)
    partial = output_path.with_suffix(output_path.suffix + ".part")

    try:
        response = requests.get(url, stream=True, timeout=30)
        response.raise_for_status()
        with open(partial, "wb") as f:
            for chunk in response.iter_content(chunk_size=8192):
                if chunk:
                    f.write(chunk)
        partial.replace(output_path)
    except requests.exceptions.RequestException as e:
        partial.unlink(missing_ok=True)
        print(f"!! ERROR downloading {url}: {e}")
        return False

    print(f"-> Saved {output_path.resolve()}")
    return True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description=f"Download schedule and survey CSV files into {DATA_DIR}/. "
        f"The public dataset is published at {DATA_REPO_URL}; pass the raw file URLs."
    )
    parser.add_argument("urls", nargs="+", help="raw CSV file URLs")
    parser.add_argument("--data-dir", type=Path, default=DATA_DIR)
    parser.add_argument("--force", action="store_true", help="re-download files that already exist")
    args = parser.parse_args(argv)
    ok = [download_and_save(u, output_path_for(u, args.data_dir), args.force) for u in args.urls]
    return 0 if all(ok) else 1


if __name__ == "__main__":
    raise SystemExit(main())
