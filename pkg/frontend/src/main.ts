/** Entry point: serve the console UI against a running bridge. */

import { Relay } from './relay.js';

function argValue(flag: string, fallback: string): string {
  const i = process.argv.indexOf(flag);
  return i >= 0 && process.argv[i + 1] ? process.argv[i + 1] : fallback;
}

const bridgeHost = argValue('--bridge-host', '127.0.0.1');
const bridgePort = Number(argValue('--bridge-port', '7410'));
const port = Number(argValue('--port', '8080'));

const relay = new Relay({ bridgeHost, bridgePort });
relay
  .start(port)
  .then((boundPort) => {
    console.log(`console on http://127.0.0.1:${boundPort} (bridge ${bridgeHost}:${bridgePort})`);
  })
  .catch((err) => {
    console.error(`cannot reach bridge at ${bridgeHost}:${bridgePort}: ${err}`);
    process.exit(1);
  });

process.on('SIGINT', () => {
  relay.stop();
  process.exit(0);
});
