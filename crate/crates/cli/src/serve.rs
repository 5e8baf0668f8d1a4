//! Runs the orderer, every peer and the HTTP gateway in one process.

use std::io::Write;
use std::net::SocketAddr;
use std::sync::Arc;

use passchain_gateway::{http, Gateway};

use crate::CliError;

/// Serves until ctrl-c. Prints the bound address first, so callers passing
/// port 0 can find it.
pub fn serve(gateway: Gateway, addr: SocketAddr) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        let bound = listener.local_addr()?;
        let mut stdout = std::io::stdout();
        writeln!(stdout, "listening on http://{bound}")?;
        stdout.flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        http::serve(listener, Arc::new(gateway), shutdown).await?;
        Ok(())
    })
}
