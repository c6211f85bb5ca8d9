#!/usr/bin/env python3
"""
xdiff Setup Script
Environment setup plus a small synthetic test set for the desk-scale run
"""

import subprocess
import sys
from pathlib import Path


def print_section(title):
    """Print a formatted section header"""
    print(f"\n{'='*60}")
    print(f"🌟 {title}")
    print(f"{'='*60}")


def run_command(cmd, description):
    """Run a command and handle errors"""
    print(f"🔄 {description}...")
    try:
        subprocess.run(cmd, shell=True, check=True, capture_output=True, text=True)
        print(f"✅ {description} completed")
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ {description} failed: {e}")
        if e.stdout:
            print(f"Output: {e.stdout}")
        if e.stderr:
            print(f"Error: {e.stderr}")
        return False


def setup_environment():
    """Setup Python environment and dependencies"""
    print_section("Environment Setup")

    python_version = sys.version_info
    print(f"🐍 Python version: {python_version.major}.{python_version.minor}.{python_version.micro}")

    if python_version < (3, 9):
        print("❌ Python 3.9+ required")
        return False

    dirs_to_create = [
        "data/train",       # Optional real training images (PGM/PNG)
        "data/synth_test",  # Synthetic evaluation images
        "output",           # Run artifacts
    ]

    for dir_path in dirs_to_create:
        Path(dir_path).mkdir(parents=True, exist_ok=True)
        print(f"📁 Created directory: {dir_path}")

    if not run_command(f"{sys.executable} -m pip install -r requirements.txt", "Installing dependencies"):
        return False

    if not Path(".env").exists() and Path(".envbase").exists():
        Path(".env").write_text(Path(".envbase").read_text())
        print("📝 Created .env from .envbase")

    print("✅ Environment setup complete!")
    return True


def setup_test_images(count=5, size=64, seed=1000):
    """Write a synthetic evaluation set that does not overlap the training seed"""
    print_section("Synthetic Test Images")

    try:
        sys.path.insert(0, str(Path.cwd() / "src"))
        from xdiff.imaging.imageio import save, synth_corpus
    except ImportError as e:
        print(f"❌ Missing dependencies: {e}")
        return False

    target = Path("data/synth_test")
    for i, img in enumerate(synth_corpus(count, (size, size), seed=seed)):
        save(img, target / f"synth{i:02d}.pgm")
    print(f"🖼️ Wrote {count} images of {size}x{size} to {target}")
    return True


def main():
    """Main setup routine"""
    print_section("xdiff Setup")

    if not setup_environment():
        print("❌ Environment setup failed")
        sys.exit(1)

    if not setup_test_images():
        print("⚠️ Could not write the synthetic test images")

    print_section("Setup Complete")
    print("🎉 xdiff is ready!")
    print("\n🚀 Desk-scale run:")
    print("   python xdiff.py train --config configs/desk.json")
    print("   python xdiff.py eval --config configs/desk.json --params output/desk/params.json")
    print("\n📚 For help:")
    print("   python xdiff.py --help")


if __name__ == "__main__":
    main()
