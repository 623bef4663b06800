//! One module per top-level subcommand.

use anyhow::Result;

use crate::{Cli, Command, Status};

pub mod gw;
pub mod pr;
pub mod schlesinger;
pub mod super_cmd;

pub fn dispatch(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Gw(args) => gw::run(args, &cli.global),
        Command::Schlesinger(cmd) => schlesinger::run(cmd, &cli.global),
        Command::Pr(cmd) => pr::run(cmd, &cli.global),
        Command::Super(cmd) => super_cmd::run(cmd, &cli.global),
    }
}
