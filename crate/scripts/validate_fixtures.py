"""Decode dumped conformance specimens with OpenCV and write the fixture CSV.

Usage:
    ALFA_FIXTURE_DIR=/tmp/alfa-fixtures cargo test -p alfa-core --test conformance -- --ignored dump_fixture_images
    python3 scripts/validate_fixtures.py /tmp/alfa-fixtures crates/core/tests/fixtures/conformance.csv
"""

import csv
import sys
from pathlib import Path

import cv2


def main(src: Path, out: Path) -> int:
    # the classic detector misses some finder layouts; the Aruco-based one is the fallback
    detectors = [cv2.QRCodeDetector(), cv2.QRCodeDetectorAruco()]
    rows = []
    failures = 0
    with open(src / "index.csv", newline="") as fh:
        for rec in csv.DictReader(fh):
            img = cv2.imread(str(src / rec["file"]), cv2.IMREAD_GRAYSCALE)
            decoded = ""
            for detector in detectors:
                decoded, _, _ = detector.detectAndDecode(img)
                if decoded:
                    break
            if decoded != rec["payload"]:
                failures += 1
                print(f"{rec['file']}: decoded {decoded!r}", file=sys.stderr)
            rows.append([rec["version"], rec["ecc"], rec["mask"], rec["image_sha256"], rec["payload"], decoded])
    with open(out, "w", newline="") as fh:
        fh.write("version,ecc,mask,image_sha256,payload,opencv_decoded\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    print(f"{len(rows) - failures}/{len(rows)} decoded")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[1]), Path(sys.argv[2])))
