// WebGPU compute backend over wgpu-native, resolved at runtime with dlopen so
// the library builds and runs on machines without it.

#include <dlfcn.h>

#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>
#include <vector>

#include "gemmlab/errors.hpp"
#include "gemmlab/gpu.hpp"
#include "webgpu/wgpu.h"

#ifndef GEMMLAB_WGPU_LIBRARY_HINT
#define GEMMLAB_WGPU_LIBRARY_HINT ""
#endif

namespace gemmlab::gpu {
namespace {

#define GEMMLAB_WGPU_FUNCTIONS(X)          \
  X(wgpuCreateInstance)                    \
  X(wgpuInstanceRequestAdapter)            \
  X(wgpuInstanceProcessEvents)             \
  X(wgpuInstanceRelease)                   \
  X(wgpuAdapterGetInfo)                    \
  X(wgpuAdapterInfoFreeMembers)            \
  X(wgpuAdapterGetLimits)                  \
  X(wgpuAdapterRequestDevice)              \
  X(wgpuAdapterRelease)                    \
  X(wgpuDeviceGetQueue)                    \
  X(wgpuDeviceCreateBuffer)                \
  X(wgpuDeviceCreateShaderModule)          \
  X(wgpuDeviceCreateComputePipeline)       \
  X(wgpuDeviceCreateBindGroup)             \
  X(wgpuDeviceCreateCommandEncoder)        \
  X(wgpuDevicePushErrorScope)              \
  X(wgpuDevicePopErrorScope)               \
  X(wgpuDevicePoll)                        \
  X(wgpuDeviceRelease)                     \
  X(wgpuComputePipelineGetBindGroupLayout) \
  X(wgpuComputePipelineRelease)            \
  X(wgpuBindGroupLayoutRelease)            \
  X(wgpuBindGroupRelease)                  \
  X(wgpuShaderModuleRelease)               \
  X(wgpuQueueWriteBuffer)                  \
  X(wgpuQueueSubmit)                       \
  X(wgpuQueueRelease)                      \
  X(wgpuCommandEncoderBeginComputePass)    \
  X(wgpuCommandEncoderCopyBufferToBuffer)  \
  X(wgpuCommandEncoderFinish)              \
  X(wgpuCommandEncoderRelease)             \
  X(wgpuCommandBufferRelease)              \
  X(wgpuComputePassEncoderSetPipeline)     \
  X(wgpuComputePassEncoderSetBindGroup)    \
  X(wgpuComputePassEncoderDispatchWorkgroups) \
  X(wgpuComputePassEncoderEnd)             \
  X(wgpuComputePassEncoderRelease)         \
  X(wgpuBufferMapAsync)                    \
  X(wgpuBufferGetConstMappedRange)         \
  X(wgpuBufferUnmap)                       \
  X(wgpuBufferDestroy)                     \
  X(wgpuBufferRelease)

struct WgpuApi {
#define GEMMLAB_DECLARE(fn) decltype(&::fn) fn = nullptr;
  GEMMLAB_WGPU_FUNCTIONS(GEMMLAB_DECLARE)
#undef GEMMLAB_DECLARE
};

// The library stays loaded for the life of the process: wgpu-native keeps
// worker threads that must not outlive its code.
const WgpuApi* load_api(std::string* why) {
  static std::once_flag once;
  static WgpuApi api;
  static bool ok = false;
  static std::string failure;
  std::call_once(once, [] {
    std::vector<std::string> candidates;
    if (const char* env = std::getenv("GEMMLAB_WGPU_LIBRARY"); env != nullptr && *env != '\0') {
      candidates.emplace_back(env);
    }
    if (std::strlen(GEMMLAB_WGPU_LIBRARY_HINT) > 0) candidates.emplace_back(GEMMLAB_WGPU_LIBRARY_HINT);
    candidates.emplace_back("libwgpu_native.so");
    candidates.emplace_back("libwgpu_native-release.so");

    void* handle = nullptr;
    for (const auto& name : candidates) {
      handle = dlopen(name.c_str(), RTLD_NOW | RTLD_LOCAL);
      if (handle != nullptr) break;
    }
    if (handle == nullptr) {
      failure = "wgpu-native library not found (set GEMMLAB_WGPU_LIBRARY)";
      return;
    }
#define GEMMLAB_RESOLVE(fn)                                                      \
  api.fn = reinterpret_cast<decltype(&::fn)>(dlsym(handle, #fn));                \
  if (api.fn == nullptr) {                                                       \
    failure = "wgpu-native library lacks symbol " #fn;                           \
    return;                                                                      \
  }
    GEMMLAB_WGPU_FUNCTIONS(GEMMLAB_RESOLVE)
#undef GEMMLAB_RESOLVE
    ok = true;
  });
  if (!ok) {
    if (why) *why = failure;
    return nullptr;
  }
  return &api;
}

WGPUStringView view(std::string_view s) { return {s.data(), s.size()}; }

// wgpu error text is "Kind\n\nCaused by:\n  detail"; keep the last line.
std::string last_line(const std::string& text) {
  std::size_t end = text.find_last_not_of(" \n\r\t");
  if (end == std::string::npos) return {};
  std::size_t begin = text.find_last_of('\n', end);
  begin = begin == std::string::npos ? 0 : begin + 1;
  begin = text.find_first_not_of(" \t", begin);
  return text.substr(begin, end - begin + 1);
}

std::string to_std(WGPUStringView s) {
  if (s.data == nullptr) return {};
  if (s.length == WGPU_STRLEN) return s.data;
  return {s.data, s.length};
}

std::string_view backend_name(WGPUBackendType type) {
  switch (type) {
    case WGPUBackendType_Vulkan: return "vulkan";
    case WGPUBackendType_Metal: return "metal";
    case WGPUBackendType_D3D12: return "d3d12";
    case WGPUBackendType_D3D11: return "d3d11";
    case WGPUBackendType_OpenGL: return "opengl";
    case WGPUBackendType_OpenGLES: return "opengles";
    default: return "other";
  }
}

std::string_view adapter_type_name(WGPUAdapterType type) {
  switch (type) {
    case WGPUAdapterType_DiscreteGPU: return "discrete";
    case WGPUAdapterType_IntegratedGPU: return "integrated";
    case WGPUAdapterType_CPU: return "cpu";
    default: return "unknown";
  }
}

class WgpuBackend final : public ComputeBackend {
 public:
  explicit WgpuBackend(const WgpuApi& api) : api_(api) {}

  WgpuBackend(const WgpuBackend&) = delete;
  WgpuBackend& operator=(const WgpuBackend&) = delete;

  ~WgpuBackend() override {
    release();
    for (auto& p : pipelines_) {
      if (p) api_.wgpuComputePipelineRelease(p);
    }
    if (queue_) api_.wgpuQueueRelease(queue_);
    if (device_) api_.wgpuDeviceRelease(device_);
    if (adapter_) api_.wgpuAdapterRelease(adapter_);
    if (instance_) api_.wgpuInstanceRelease(instance_);
  }

  // Returns false (with a reason) when no acceptable adapter exists.
  bool init(std::string* why) {
    WGPUInstanceDescriptor instance_desc{};
    instance_ = api_.wgpuCreateInstance(&instance_desc);
    if (!instance_) return fail(why, "wgpuCreateInstance failed");

    struct AdapterReply {
      bool done = false;
      WGPUAdapter adapter = nullptr;
      std::string message;
    } reply;
    WGPURequestAdapterOptions options{};
    options.featureLevel = WGPUFeatureLevel_Core;
    options.powerPreference = WGPUPowerPreference_HighPerformance;
    WGPURequestAdapterCallbackInfo cb{};
    cb.mode = WGPUCallbackMode_AllowProcessEvents;
    cb.callback = [](WGPURequestAdapterStatus status, WGPUAdapter adapter, WGPUStringView message, void* ud, void*) {
      auto* r = static_cast<AdapterReply*>(ud);
      if (status == WGPURequestAdapterStatus_Success) r->adapter = adapter;
      r->message = to_std(message);
      r->done = true;
    };
    cb.userdata1 = &reply;
    api_.wgpuInstanceRequestAdapter(instance_, &options, cb);
    while (!reply.done) api_.wgpuInstanceProcessEvents(instance_);
    if (!reply.adapter) return fail(why, "no GPU adapter: " + last_line(reply.message));
    adapter_ = reply.adapter;

    WGPUAdapterInfo adapter_info{};
    if (api_.wgpuAdapterGetInfo(adapter_, &adapter_info) != WGPUStatus_Success) {
      return fail(why, "wgpuAdapterGetInfo failed");
    }
    info_.name = to_std(adapter_info.device);
    if (info_.name.empty()) info_.name = to_std(adapter_info.description);
    if (info_.name.empty()) info_.name = to_std(adapter_info.vendor);
    info_.backend = backend_name(adapter_info.backendType);
    info_.adapter_type = adapter_type_name(adapter_info.adapterType);
    const bool software = adapter_info.adapterType == WGPUAdapterType_CPU;
    api_.wgpuAdapterInfoFreeMembers(adapter_info);

    const char* allow_cpu = std::getenv("GEMMLAB_ALLOW_CPU_ADAPTER");
    if (software && (allow_cpu == nullptr || std::string_view(allow_cpu) != "1")) {
      return fail(why, "only a software adapter (" + info_.name + ") is available");
    }

    WGPULimits limits{};
    if (api_.wgpuAdapterGetLimits(adapter_, &limits) != WGPUStatus_Success) {
      return fail(why, "wgpuAdapterGetLimits failed");
    }
    if (limits.maxComputeWorkgroupSizeX < kTile || limits.maxComputeWorkgroupSizeY < kTile ||
        limits.maxComputeInvocationsPerWorkgroup < kTile * kTile) {
      return fail(why, "adapter cannot run 16x16 workgroups");
    }
    info_.max_workgroup_size = limits.maxComputeInvocationsPerWorkgroup;
    info_.max_buffer_bytes = std::min<std::uint64_t>(limits.maxBufferSize, limits.maxStorageBufferBindingSize);

    struct DeviceReply {
      bool done = false;
      WGPUDevice device = nullptr;
      std::string message;
    } dreply;
    WGPUDeviceDescriptor device_desc{};
    device_desc.label = view("gemmlab");
    device_desc.requiredLimits = &limits;
    device_desc.uncapturedErrorCallbackInfo.callback = [](WGPUDevice const*, WGPUErrorType, WGPUStringView message,
                                                          void* ud, void*) {
      auto* self = static_cast<WgpuBackend*>(ud);
      if (!self->pending_error_.empty()) self->pending_error_ += "\n";
      self->pending_error_ += to_std(message);
    };
    device_desc.uncapturedErrorCallbackInfo.userdata1 = this;
    WGPURequestDeviceCallbackInfo dcb{};
    dcb.mode = WGPUCallbackMode_AllowProcessEvents;
    dcb.callback = [](WGPURequestDeviceStatus status, WGPUDevice device, WGPUStringView message, void* ud, void*) {
      auto* r = static_cast<DeviceReply*>(ud);
      if (status == WGPURequestDeviceStatus_Success) r->device = device;
      r->message = to_std(message);
      r->done = true;
    };
    dcb.userdata1 = &dreply;
    api_.wgpuAdapterRequestDevice(adapter_, &device_desc, dcb);
    while (!dreply.done) api_.wgpuInstanceProcessEvents(instance_);
    if (!dreply.device) return fail(why, "device request failed: " + last_line(dreply.message));
    device_ = dreply.device;
    queue_ = api_.wgpuDeviceGetQueue(device_);
    info_.available = true;
    return true;
  }

  DeviceInfo info() const override { return info_; }

  void compile(KernelVariant variant, std::string_view wgsl) override {
    WGPUShaderSourceWGSL source{};
    source.chain.sType = WGPUSType_ShaderSourceWGSL;
    source.code = view(wgsl);
    WGPUShaderModuleDescriptor module_desc{};
    module_desc.nextInChain = &source.chain;
    const std::string label = "matmul_" + std::string(to_string(variant));
    module_desc.label = view(label);

    api_.wgpuDevicePushErrorScope(device_, WGPUErrorFilter_Validation);
    WGPUShaderModule module = api_.wgpuDeviceCreateShaderModule(device_, &module_desc);
    WGPUComputePipelineDescriptor pipeline_desc{};
    pipeline_desc.label = view(label);
    pipeline_desc.compute.module = module;
    pipeline_desc.compute.entryPoint = view(kEntryPoint);
    WGPUComputePipeline pipeline = api_.wgpuDeviceCreateComputePipeline(device_, &pipeline_desc);
    const auto scope = pop_error_scope();
    if (module) api_.wgpuShaderModuleRelease(module);
    if (scope.type != WGPUErrorType_NoError || !pipeline) {
      if (pipeline) api_.wgpuComputePipelineRelease(pipeline);
      throw BackendError(label + " failed to compile: " + scope.message);
    }
    auto& slot = pipelines_[slot_of(variant)];
    if (slot) api_.wgpuComputePipelineRelease(slot);
    slot = pipeline;
  }

  void allocate(std::size_t n) override {
    release();
    bytes_ = static_cast<std::uint64_t>(n) * n * sizeof(float);
    api_.wgpuDevicePushErrorScope(device_, WGPUErrorFilter_OutOfMemory);
    a_ = make_buffer("A", WGPUBufferUsage_Storage | WGPUBufferUsage_CopyDst, bytes_);
    b_ = make_buffer("B", WGPUBufferUsage_Storage | WGPUBufferUsage_CopyDst, bytes_);
    c_ = make_buffer("C", WGPUBufferUsage_Storage | WGPUBufferUsage_CopySrc, bytes_);
    params_ = make_buffer("params", WGPUBufferUsage_Uniform | WGPUBufferUsage_CopyDst, kParamsBytes);
    readback_ = make_buffer("readback", WGPUBufferUsage_MapRead | WGPUBufferUsage_CopyDst, bytes_);
    const auto scope = pop_error_scope();
    if (scope.type == WGPUErrorType_OutOfMemory) {
      release();
      throw OutOfDeviceMemory("device allocation failed: " + scope.message);
    }
    if (scope.type != WGPUErrorType_NoError || !a_ || !b_ || !c_ || !params_ || !readback_) {
      release();
      throw BackendError("buffer creation failed: " + scope.message);
    }
    check("allocate");
  }

  void upload(std::span<const float> a, std::span<const float> b, std::uint32_t n) override {
    require_allocated();
    api_.wgpuQueueWriteBuffer(queue_, a_, 0, a.data(), a.size_bytes());
    api_.wgpuQueueWriteBuffer(queue_, b_, 0, b.data(), b.size_bytes());
    const std::uint32_t params[4] = {n, 0, 0, 0};
    api_.wgpuQueueWriteBuffer(queue_, params_, 0, params, sizeof(params));
    // An empty submission flushes the staged writes.
    api_.wgpuQueueSubmit(queue_, 0, nullptr);
    api_.wgpuDevicePoll(device_, true, nullptr);
    check("upload");
  }

  void dispatch(KernelVariant variant, DispatchGrid grid) override {
    require_allocated();
    WGPUComputePipeline pipeline = pipelines_[slot_of(variant)];
    if (!pipeline) throw BackendError(std::string(to_string(variant)) + " kernel not compiled");

    WGPUBindGroupLayout layout = api_.wgpuComputePipelineGetBindGroupLayout(pipeline, kBindGroup);
    WGPUBindGroupEntry entries[4]{};
    const WGPUBuffer buffers[4] = {a_, b_, c_, params_};
    const std::uint32_t bindings[4] = {kBindingA, kBindingB, kBindingC, kBindingParams};
    for (int i = 0; i < 4; ++i) {
      entries[i].binding = bindings[i];
      entries[i].buffer = buffers[i];
      entries[i].offset = 0;
      entries[i].size = i == 3 ? kParamsBytes : bytes_;
    }
    WGPUBindGroupDescriptor group_desc{};
    group_desc.layout = layout;
    group_desc.entryCount = 4;
    group_desc.entries = entries;
    WGPUBindGroup group = api_.wgpuDeviceCreateBindGroup(device_, &group_desc);
    api_.wgpuBindGroupLayoutRelease(layout);

    WGPUCommandEncoder encoder = api_.wgpuDeviceCreateCommandEncoder(device_, nullptr);
    WGPUComputePassEncoder pass = api_.wgpuCommandEncoderBeginComputePass(encoder, nullptr);
    api_.wgpuComputePassEncoderSetPipeline(pass, pipeline);
    api_.wgpuComputePassEncoderSetBindGroup(pass, kBindGroup, group, 0, nullptr);
    api_.wgpuComputePassEncoderDispatchWorkgroups(pass, grid.x, grid.y, grid.z);
    api_.wgpuComputePassEncoderEnd(pass);
    api_.wgpuComputePassEncoderRelease(pass);
    WGPUCommandBuffer commands = api_.wgpuCommandEncoderFinish(encoder, nullptr);
    api_.wgpuCommandEncoderRelease(encoder);
    api_.wgpuQueueSubmit(queue_, 1, &commands);
    api_.wgpuCommandBufferRelease(commands);
    api_.wgpuDevicePoll(device_, true, nullptr);
    api_.wgpuBindGroupRelease(group);
    check("dispatch");
  }

  void download(std::span<float> c) override {
    require_allocated();
    WGPUCommandEncoder encoder = api_.wgpuDeviceCreateCommandEncoder(device_, nullptr);
    api_.wgpuCommandEncoderCopyBufferToBuffer(encoder, c_, 0, readback_, 0, bytes_);
    WGPUCommandBuffer commands = api_.wgpuCommandEncoderFinish(encoder, nullptr);
    api_.wgpuCommandEncoderRelease(encoder);
    api_.wgpuQueueSubmit(queue_, 1, &commands);
    api_.wgpuCommandBufferRelease(commands);

    struct MapReply {
      bool done = false;
      bool ok = false;
      std::string message;
    } reply;
    WGPUBufferMapCallbackInfo cb{};
    cb.mode = WGPUCallbackMode_AllowProcessEvents;
    cb.callback = [](WGPUMapAsyncStatus status, WGPUStringView message, void* ud, void*) {
      auto* r = static_cast<MapReply*>(ud);
      r->ok = status == WGPUMapAsyncStatus_Success;
      r->message = to_std(message);
      r->done = true;
    };
    cb.userdata1 = &reply;
    api_.wgpuBufferMapAsync(readback_, WGPUMapMode_Read, 0, bytes_, cb);
    while (!reply.done) {
      api_.wgpuDevicePoll(device_, true, nullptr);
      api_.wgpuInstanceProcessEvents(instance_);
    }
    if (!reply.ok) throw BackendError("readback map failed: " + reply.message);
    const void* mapped = api_.wgpuBufferGetConstMappedRange(readback_, 0, bytes_);
    if (mapped == nullptr) {
      api_.wgpuBufferUnmap(readback_);
      throw BackendError("readback mapping returned null");
    }
    std::memcpy(c.data(), mapped, std::min<std::size_t>(c.size_bytes(), bytes_));
    api_.wgpuBufferUnmap(readback_);
    check("download");
  }

  void release() noexcept override {
    for (WGPUBuffer* buf : {&a_, &b_, &c_, &params_, &readback_}) {
      if (*buf) {
        api_.wgpuBufferDestroy(*buf);
        api_.wgpuBufferRelease(*buf);
        *buf = nullptr;
      }
    }
    bytes_ = 0;
  }

 private:
  static constexpr std::uint64_t kParamsBytes = 16;

  struct ScopeResult {
    WGPUErrorType type = WGPUErrorType_NoError;
    std::string message;
  };

  static std::size_t slot_of(KernelVariant v) { return v == KernelVariant::Naive ? 0 : 1; }

  static bool fail(std::string* why, std::string reason) {
    if (why) *why = std::move(reason);
    return false;
  }

  WGPUBuffer make_buffer(std::string_view label, WGPUBufferUsage usage, std::uint64_t size) {
    WGPUBufferDescriptor desc{};
    desc.label = view(label);
    desc.usage = usage;
    desc.size = size;
    return api_.wgpuDeviceCreateBuffer(device_, &desc);
  }

  ScopeResult pop_error_scope() {
    struct Reply {
      bool done = false;
      ScopeResult result;
    } reply;
    WGPUPopErrorScopeCallbackInfo cb{};
    cb.mode = WGPUCallbackMode_AllowProcessEvents;
    cb.callback = [](WGPUPopErrorScopeStatus, WGPUErrorType type, WGPUStringView message, void* ud, void*) {
      auto* r = static_cast<Reply*>(ud);
      r->result.type = type;
      r->result.message = to_std(message);
      r->done = true;
    };
    cb.userdata1 = &reply;
    api_.wgpuDevicePopErrorScope(device_, cb);
    while (!reply.done) {
      api_.wgpuInstanceProcessEvents(instance_);
      api_.wgpuDevicePoll(device_, false, nullptr);
    }
    return reply.result;
  }

  void require_allocated() const {
    if (!a_) throw BackendError("device buffers not allocated");
  }

  void check(std::string_view phase) {
    if (pending_error_.empty()) return;
    std::string message = std::move(pending_error_);
    pending_error_.clear();
    throw BackendError(std::string(phase) + ": " + message);
  }

  const WgpuApi& api_;
  WGPUInstance instance_ = nullptr;
  WGPUAdapter adapter_ = nullptr;
  WGPUDevice device_ = nullptr;
  WGPUQueue queue_ = nullptr;
  WGPUComputePipeline pipelines_[2] = {nullptr, nullptr};
  WGPUBuffer a_ = nullptr;
  WGPUBuffer b_ = nullptr;
  WGPUBuffer c_ = nullptr;
  WGPUBuffer params_ = nullptr;
  WGPUBuffer readback_ = nullptr;
  std::uint64_t bytes_ = 0;
  DeviceInfo info_;
  std::string pending_error_;
};

}  // namespace

std::unique_ptr<ComputeBackend> open_wgpu_backend(std::string* why) {
  const WgpuApi* api = load_api(why);
  if (api == nullptr) return nullptr;
  auto backend = std::make_unique<WgpuBackend>(*api);
  if (!backend->init(why)) return nullptr;
  return backend;
}

}  // namespace gemmlab::gpu
