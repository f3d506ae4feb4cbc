import { bootstrap } from "./app.js";

void bootstrap(document.getElementById("app") as HTMLElement);
