#include <chrono>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>
#include <vector>

#include "gemmlab/errors.hpp"
#include "gemmlab/gpu.hpp"

#ifndef GEMMLAB_DEFAULT_SHADER_DIR
#define GEMMLAB_DEFAULT_SHADER_DIR "shaders"
#endif

namespace gemmlab::gpu {

std::string_view to_string(KernelVariant variant) noexcept {
  return variant == KernelVariant::Naive ? "naive" : "tiled";
}

std::string_view to_string(TimingScope scope) noexcept {
  switch (scope) {
    case TimingScope::TransfersAndKernel: return "transfers+kernel";
    case TimingScope::AllocTransfersKernel: return "alloc+transfers+kernel";
    case TimingScope::KernelOnly: return "kernel";
  }
  return "?";
}

TimingScope parse_timing_scope(std::string_view text) {
  for (auto scope : {TimingScope::TransfersAndKernel, TimingScope::AllocTransfersKernel, TimingScope::KernelOnly}) {
    if (text == to_string(scope)) return scope;
  }
  throw ConfigError("unknown timing scope '" + std::string(text) +
                    "' (expected transfers+kernel, alloc+transfers+kernel or kernel)");
}

double scoped_total(const GpuTiming& t, TimingScope scope) noexcept {
  switch (scope) {
    case TimingScope::TransfersAndKernel: return t.h2d_ms + t.kernel_ms + t.d2h_ms;
    case TimingScope::AllocTransfersKernel: return t.alloc_ms + t.h2d_ms + t.kernel_ms + t.d2h_ms;
    case TimingScope::KernelOnly: return t.kernel_ms;
  }
  return 0.0;
}

DispatchGrid dispatch_grid(std::size_t n) {
  if (n == 0) throw InvalidDimension("dispatch_grid: n must be >= 1");
  const auto groups = static_cast<std::uint32_t>((n + kTile - 1) / kTile);
  return {groups, groups, 1};
}

std::uint64_t required_device_bytes(std::size_t n) noexcept {
  return 3ULL * n * n * sizeof(float);
}

std::string_view shader_file_name(KernelVariant variant) noexcept {
  return variant == KernelVariant::Naive ? "matmul_naive.wgsl" : "matmul_tiled.wgsl";
}

std::filesystem::path default_shader_dir() {
  if (const char* env = std::getenv("GEMMLAB_SHADER_DIR"); env != nullptr && *env != '\0') return env;
  return GEMMLAB_DEFAULT_SHADER_DIR;
}

namespace {

std::string strip_comments(std::string_view src) {
  std::string out;
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size();) {
    if (src.compare(i, 2, "//") == 0) {
      while (i < src.size() && src[i] != '\n') ++i;
    } else if (src.compare(i, 2, "/*") == 0) {
      // WGSL block comments nest.
      int depth = 0;
      do {
        if (src.compare(i, 2, "/*") == 0) {
          ++depth;
          i += 2;
        } else if (src.compare(i, 2, "*/") == 0) {
          --depth;
          i += 2;
        } else {
          ++i;
        }
      } while (depth > 0 && i < src.size());
      out.push_back(' ');
    } else {
      out.push_back(src[i++]);
    }
  }
  return out;
}

std::size_t count_matches(const std::string& text, const std::regex& re) {
  return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

std::string binding_pattern(std::uint32_t binding, const std::string& address_space) {
  const std::string group = R"(@group\s*\(\s*0\s*\))";
  const std::string bind = R"(@binding\s*\(\s*)" + std::to_string(binding) + R"(\s*\))";
  return "(" + group + R"(\s*)" + bind + "|" + bind + R"(\s*)" + group + R"()\s*var\s*<\s*)" + address_space;
}

}  // namespace

void validate_shader_source(std::string_view source, KernelVariant variant) {
  const std::string code = strip_comments(source);
  std::vector<std::string> missing;

  auto need = [&](const std::string& pattern, std::string_view description, std::size_t min_count = 1) {
    if (count_matches(code, std::regex(pattern)) < min_count) missing.emplace_back(description);
  };

  need(R"(@compute)", "@compute entry point");
  need(R"(@workgroup_size\s*\(\s*16\s*,\s*16\s*(,\s*1\s*)?,?\s*\))", "@workgroup_size(16, 16)");
  need(R"(\bfn\s+main\s*\()", "fn main");
  need(binding_pattern(kBindingA, R"(storage\s*,\s*read\s*>)"), "@group(0) @binding(0) var<storage, read> (A)");
  need(binding_pattern(kBindingB, R"(storage\s*,\s*read\s*>)"), "@group(0) @binding(1) var<storage, read> (B)");
  need(binding_pattern(kBindingC, R"(storage\s*,\s*read_write\s*>)"), "@group(0) @binding(2) var<storage, read_write> (C)");
  need(binding_pattern(kBindingParams, R"(uniform\s*>)"), "@group(0) @binding(3) var<uniform> (params)");
  if (variant == KernelVariant::Tiled) {
    need(R"(var\s*<\s*workgroup\s*>)", "two var<workgroup> tiles", 2);
    need(R"(\bworkgroupBarrier\s*\(\s*\))", "two workgroupBarrier() calls", 2);
  }

  if (!missing.empty()) {
    std::ostringstream msg;
    msg << to_string(variant) << " shader does not match the binding layout; missing:";
    for (const auto& m : missing) msg << "\n  - " << m;
    throw BackendError(msg.str());
  }
}

std::string load_shader(const std::filesystem::path& dir, KernelVariant variant) {
  const auto path = dir / shader_file_name(variant);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read shader asset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string source = buf.str();
  try {
    validate_shader_source(source, variant);
  } catch (const BackendError& e) {
    throw BackendError(path.string() + ": " + e.what());
  }
  return source;
}

bool gpu_disabled_by_env() {
  const char* env = std::getenv("GEMMLAB_NO_GPU");
  return env != nullptr && *env != '\0' && std::string_view(env) != "0";
}

DeviceInfo probe_device() {
  if (gpu_disabled_by_env()) return {};
  try {
    auto backend = open_wgpu_backend();
    if (!backend) return {};
    return backend->info();
  } catch (...) {
    return {};
  }
}

GpuContext::GpuContext(std::unique_ptr<ComputeBackend> backend, std::filesystem::path shader_dir)
    : backend_(std::move(backend)), shader_dir_(std::move(shader_dir)), mutex_(std::make_unique<std::mutex>()) {
  if (!backend_) throw DeviceUnavailable("no GPU device");
  info_ = backend_->info();
  if (!info_.available) throw DeviceUnavailable("no GPU device");
}

GpuContext::GpuContext(GpuContext&&) noexcept = default;
GpuContext& GpuContext::operator=(GpuContext&&) noexcept = default;
GpuContext::~GpuContext() = default;

std::optional<GpuContext> GpuContext::open_default(std::string* why) {
  if (gpu_disabled_by_env()) {
    if (why) *why = "disabled by GEMMLAB_NO_GPU";
    return std::nullopt;
  }
  auto backend = open_wgpu_backend(why);
  if (!backend) return std::nullopt;
  return GpuContext(std::move(backend), default_shader_dir());
}

void GpuContext::ensure_compiled(KernelVariant variant) {
  auto& done = compiled_[variant == KernelVariant::Naive ? 0 : 1];
  if (done) return;
  backend_->compile(variant, load_shader(shader_dir_, variant));
  done = true;
}

GpuResult matmul_gpu(GpuContext& ctx, const Matrix& a, const Matrix& b, KernelVariant variant, TimingScope scope) {
  if (!a.square() || !b.square() || a.rows() != b.rows()) {
    throw ShapeError("matmul_gpu: inputs must be square and equally sized");
  }
  const std::size_t n = a.rows();
  if (n > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("matmul_gpu: n exceeds u32");

  const DeviceInfo& info = ctx.info();
  const std::uint64_t matrix_bytes = static_cast<std::uint64_t>(n) * n * sizeof(float);
  if ((info.dedicated_memory_bytes != 0 && required_device_bytes(n) > info.dedicated_memory_bytes) ||
      (info.max_buffer_bytes != 0 && matrix_bytes > info.max_buffer_bytes)) {
    throw OutOfDeviceMemory("matmul_gpu: " + std::to_string(n) + "x" + std::to_string(n) +
                            " does not fit the device (" + std::to_string(required_device_bytes(n)) + " bytes needed)");
  }

  std::lock_guard lock(ctx.mutex());
  ctx.ensure_compiled(variant);
  ComputeBackend& dev = ctx.backend();

  using clock = std::chrono::steady_clock;
  auto ms = [](clock::time_point from, clock::time_point to) {
    return std::chrono::duration<double, std::milli>(to - from).count();
  };

  Matrix c(n, n);
  GpuTiming timing;
  struct Releaser {
    ComputeBackend& dev;
    ~Releaser() { dev.release(); }
  };

  const auto t0 = clock::now();
  dev.allocate(n);
  Releaser releaser{dev};
  const auto t1 = clock::now();
  dev.upload(a.data(), b.data(), static_cast<std::uint32_t>(n));
  const auto t2 = clock::now();
  dev.dispatch(variant, dispatch_grid(n));
  const auto t3 = clock::now();
  dev.download(c.data());
  const auto t4 = clock::now();

  timing.alloc_ms = ms(t0, t1);
  timing.h2d_ms = ms(t1, t2);
  timing.kernel_ms = ms(t2, t3);
  timing.d2h_ms = ms(t3, t4);
  timing.total_ms = scoped_total(timing, scope);
  return {std::move(c), timing};
}

}  // namespace gemmlab::gpu
