#pragma once

#include <memory>
#include <string>
#include <thread>

#include "texfuse/inpaint.hpp"

namespace texfuse
{
    // Serves /inpaint, /backview and /health on top of a local backend so the
    // remote client can be exercised without the diffusion service.
    class MockServer
    {
    public:
        MockServer(std::unique_ptr<InpaintBackend> backend, std::string model_name);
        ~MockServer();

        MockServer(const MockServer&) = delete;
        MockServer& operator=(const MockServer&) = delete;

        // Returns the bound port (an ephemeral one when `port` is 0).
        int bind(const std::string& host, int port);
        // Blocks until stop() is called from another thread.
        void listen();
        void start();
        void stop();

        int port() const noexcept
        {
            return port_;
        }

    private:
        class Impl;
        std::unique_ptr<Impl> impl_;
        std::thread thread_;
        int port_ = 0;
    };
} // namespace texfuse
