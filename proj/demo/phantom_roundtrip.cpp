// Builds a phantom, suppresses its ribs and compares against the known soft
// tissue. Optional argument: seed. Optional second argument: output directory
// for raw/soft/gt PNGs.

#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include <ribsupp.hpp>

int main(int argc, char** argv) {
  using namespace ribsupp;
  PhantomSpec spec;
  spec.seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  spec.vessel_count = 8;
  spec.vessel_contrast = 1200.0;
  spec.nodule_count = 3;
  spec.nodule_contrast = 1800.0;
  const PhantomCase pc = generate_phantom(spec);

  const SuppressionResult res = suppress_all(pc.raw, pc.masks, SuppressionParams{});
  const Bitmap ribs = pc.masks.union_bitmap(spec.width, spec.height);

  std::printf("ribs              %zu\n", pc.masks.size());
  std::printf("rmse in ribs      raw %.1f  soft %.1f  (A = %.1f)\n", rmse(pc.raw, pc.gt_soft, ribs),
              rmse(res.soft, pc.gt_soft, ribs), spec.rib_amplitude);
  const MetricsReport before = evaluate(pc.gt_soft, pc.raw, spec.max_value);
  const MetricsReport after = evaluate(pc.gt_soft, res.soft, spec.max_value);
  std::printf("psnr (dB)         raw %.2f  soft %.2f\n", before.psnr_db, after.psnr_db);
  std::printf("ms-ssim           raw %.4f  soft %.4f\n", before.ms_ssim, after.ms_ssim);
  std::printf("combined loss     raw %.4f  soft %.4f\n", before.combined, after.combined);

  if (argc > 2) {
    const std::filesystem::path dir = argv[2];
    std::filesystem::create_directories(dir);
    save_image(pc.raw, dir / "raw.png", 16);
    save_image(res.soft, dir / "soft.png", 16);
    save_image(pc.gt_soft, dir / "gt_soft.png", 16);
    save_label_image(pc.masks.to_label_image(), dir / "masks.png");
  }
  return 0;
}
