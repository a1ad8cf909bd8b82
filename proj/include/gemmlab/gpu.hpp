#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "gemmlab/matrix.hpp"

namespace gemmlab::gpu {

// Workgroup edge length. Both kernels run 16x16 workgroups.
inline constexpr std::uint32_t kTile = 16;

// Binding layout shared with the WGSL kernels (all in @group(0)):
//   @binding(0) A       var<storage, read>
//   @binding(1) B       var<storage, read>
//   @binding(2) C       var<storage, read_write>
//   @binding(3) params  var<uniform>  struct { n : u32 }
// Entry point is `main`, declared @compute @workgroup_size(16, 16).
// global_invocation_id.x indexes the column, .y the row.
inline constexpr std::uint32_t kBindGroup = 0;
inline constexpr std::uint32_t kBindingA = 0;
inline constexpr std::uint32_t kBindingB = 1;
inline constexpr std::uint32_t kBindingC = 2;
inline constexpr std::uint32_t kBindingParams = 3;
inline constexpr std::string_view kEntryPoint = "main";

enum class KernelVariant { Naive, Tiled };

enum class TimingScope { TransfersAndKernel, AllocTransfersKernel, KernelOnly };

std::string_view to_string(KernelVariant variant) noexcept;
std::string_view to_string(TimingScope scope) noexcept;
// Accepts "transfers+kernel", "alloc+transfers+kernel", "kernel".
TimingScope parse_timing_scope(std::string_view text);

struct DeviceInfo {
  bool available = false;
  std::string name;
  // Not reported by every backend; 0 means unknown.
  std::uint64_t dedicated_memory_bytes = 0;
  std::uint32_t max_workgroup_size = 0;
  std::uint64_t max_buffer_bytes = 0;
  std::string backend;
  std::string adapter_type;
};

struct GpuTiming {
  double alloc_ms = 0.0;
  double h2d_ms = 0.0;
  double kernel_ms = 0.0;
  double d2h_ms = 0.0;
  double total_ms = 0.0;
};

// Sum of the phases that fall inside `scope`.
double scoped_total(const GpuTiming& timing, TimingScope scope) noexcept;

struct DispatchGrid {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t z = 1;
};

// ceil(n / 16) workgroups along x and y.
DispatchGrid dispatch_grid(std::size_t n);

// Bytes the device must hold for one n x n multiply (A, B, C).
std::uint64_t required_device_bytes(std::size_t n) noexcept;

// ---- shader assets -------------------------------------------------------

std::string_view shader_file_name(KernelVariant variant) noexcept;

// GEMMLAB_SHADER_DIR if set, else the directory configured at build time.
std::filesystem::path default_shader_dir();

// Checks the source against the binding layout above. Throws BackendError
// naming every missing declaration.
void validate_shader_source(std::string_view source, KernelVariant variant);

// Reads <dir>/<shader_file_name(variant)> and validates it.
std::string load_shader(const std::filesystem::path& dir, KernelVariant variant);

// ---- device backend ------------------------------------------------------

// One device queue. Every call returns only once the device has finished the
// work it issued, so host-side clocks around each call time that phase.
class ComputeBackend {
 public:
  virtual ~ComputeBackend() = default;

  virtual DeviceInfo info() const = 0;
  virtual void compile(KernelVariant variant, std::string_view wgsl) = 0;
  virtual void allocate(std::size_t n) = 0;
  virtual void upload(std::span<const float> a, std::span<const float> b, std::uint32_t n) = 0;
  virtual void dispatch(KernelVariant variant, DispatchGrid grid) = 0;
  virtual void download(std::span<float> c) = 0;
  virtual void release() noexcept = 0;
};

// WebGPU backend through a dynamically loaded wgpu-native. Returns nullptr
// when the library or a usable adapter is missing; `why` receives the reason.
std::unique_ptr<ComputeBackend> open_wgpu_backend(std::string* why = nullptr);

// True when GEMMLAB_NO_GPU is set to anything other than "" or "0".
bool gpu_disabled_by_env();

// Best available device, or DeviceInfo{available=false}. Never throws.
DeviceInfo probe_device();

// Serializes use of one backend and caches compiled kernels.
class GpuContext {
 public:
  GpuContext(std::unique_ptr<ComputeBackend> backend, std::filesystem::path shader_dir);

  // nullopt when no device is usable.
  static std::optional<GpuContext> open_default(std::string* why = nullptr);

  GpuContext(GpuContext&&) noexcept;
  GpuContext& operator=(GpuContext&&) noexcept;
  ~GpuContext();

  const DeviceInfo& info() const noexcept { return info_; }
  ComputeBackend& backend() noexcept { return *backend_; }
  const std::filesystem::path& shader_dir() const noexcept { return shader_dir_; }

  // Loads, validates, and compiles the variant's shader once.
  void ensure_compiled(KernelVariant variant);

  std::mutex& mutex() noexcept { return *mutex_; }

 private:
  std::unique_ptr<ComputeBackend> backend_;
  std::filesystem::path shader_dir_;
  DeviceInfo info_;
  std::array<bool, 2> compiled_{false, false};
  std::unique_ptr<std::mutex> mutex_;
};

struct GpuResult {
  Matrix c;
  GpuTiming timing;
};

// Square inputs only. Phases are timed individually with a steady clock;
// timing.total_ms is the sum of the phases inside `scope`.
GpuResult matmul_gpu(GpuContext& ctx, const Matrix& a, const Matrix& b, KernelVariant variant,
                     TimingScope scope = TimingScope::TransfersAndKernel);

}  // namespace gemmlab::gpu
